#!/usr/bin/env python3
"""Entry point for running the CLI from a source checkout."""

import sys

from expected_rewards.cli.main import main as cli_main

if __name__ == "__main__":
    sys.exit(cli_main())
