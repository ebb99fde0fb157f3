"""
Entry point: `python app.py <design|sweep|validate|pdf|offset> ...`

See src/cli.py for the subcommands and their flags.
"""

import sys

from src.cli import cli_main

if __name__ == "__main__":
    sys.exit(cli_main())
