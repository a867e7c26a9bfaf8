"""Stateless model checker for MCIR concurrent programs."""

from __future__ import annotations

import os
from ._minimc import (
    InterceptError,
    LinkError,
    MinimcError,
    Options,
    OracleCapExceeded,
    ParseError,
    ValidationError,
    Verdict,
    check_files,
    check_sources,
    normalize,
    parse_machine_record,
    replay,
    stages,
    transform,
)

__all__ = [
    "InterceptError",
    "LinkError",
    "MinimcError",
    "Options",
    "OracleCapExceeded",
    "ParseError",
    "ValidationError",
    "Verdict",
    "check",
    "check_files",
    "check_sources",
    "normalize",
    "options",
    "parse_machine_record",
    "replay",
    "stages",
    "transform",
]

__version__ = "0.1.0"


def options(**kwargs) -> Options:
    """Build an Options object from keyword arguments (unroll=5, oracle=True, ...)."""
    opts = Options()
    for key, value in kwargs.items():
        if not hasattr(opts, key):
            raise TypeError(f"unknown option {key!r}")
        setattr(opts, key, value)
    return opts


def check(*paths: str | os.PathLike, **kwargs) -> Verdict:
    """Link the given .mcir files and verify the result."""
    return check_files([os.fspath(p) for p in paths], options(**kwargs))

