"""Command-line entry point: ``python -m peergeo <command>``."""

from peergeo.cli.main import build_parser, main

__all__ = ["build_parser", "main"]
