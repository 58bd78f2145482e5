"""Entry point for the ceamcl command."""

import sys

from src.handlers.cli import main

if __name__ == "__main__":
    sys.exit(main())
