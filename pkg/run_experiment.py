#!/usr/bin/env python
"""Run an experiment: ``python run_experiment.py run configs/heat_minimal.json``."""
import sys

from tools.cli import main

if __name__ == "__main__":
    sys.exit(main())
