#!/usr/bin/env python3
"""Run the cfp_linear experiment at its default parameters."""
import sys

from sspg.cli import run_default

if __name__ == "__main__":
    sys.exit(run_default("cfp_linear", sys.argv[1:]))
