"""Contextual equivalence checker for a higher-order language with local state."""

from pathlib import Path

from ._core import ParseError, TypeError, check, check_stacked, pretty, replay, split_pair, typecheck

__all__ = [
    "ParseError",
    "TypeError",
    "check",
    "check_file",
    "check_stacked",
    "pretty",
    "replay",
    "split_pair",
    "typecheck",
]


def check_file(path, **options):
    """Check a pair file: two programs separated by a line holding only '|||'."""
    left, right = split_pair(Path(path).read_text())
    return check(left, right, **options)
