#!/usr/bin/env python3
"""Main entry point for the PTC entropy CLI."""

from ptc_entropy.cli import run


if __name__ == "__main__":
    run()
