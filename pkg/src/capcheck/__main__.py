#!/usr/bin/env python3
"""Entry point for the capcheck command."""

from capcheck.cli import main

if __name__ == "__main__":
    main()
