#!/usr/bin/env python3
"""Run the rate_sweep experiment at its default parameters."""
import sys

from sspg.cli import run_default

if __name__ == "__main__":
    sys.exit(run_default("rate_sweep", sys.argv[1:]))
