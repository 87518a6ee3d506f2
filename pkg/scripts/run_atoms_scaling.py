#!/usr/bin/env python3
"""Run the atoms_scaling experiment at its default parameters."""
import sys

from sspg.cli import run_default

if __name__ == "__main__":
    sys.exit(run_default("atoms_scaling", sys.argv[1:]))
