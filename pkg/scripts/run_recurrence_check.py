#!/usr/bin/env python3
"""Run the recurrence_check experiment at its default parameters."""
import sys

from sspg.cli import run_default

if __name__ == "__main__":
    sys.exit(run_default("recurrence_check", sys.argv[1:]))
