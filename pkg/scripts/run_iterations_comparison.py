#!/usr/bin/env python3
"""Run the iterations_comparison experiment at its default parameters."""
import sys

from sspg.cli import run_default

if __name__ == "__main__":
    sys.exit(run_default("iterations_comparison", sys.argv[1:]))
