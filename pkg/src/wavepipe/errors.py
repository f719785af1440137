"""Error taxonomy shared across the package.

Every raised error carries a stable ``code`` string so the CLI and the
gateway can report machine-readable failures without string matching.
"""

from __future__ import annotations


class WavepipeError(Exception):
    """Base class for all package errors."""

    code = "ERROR"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details

    def __str__(self) -> str:
        return self.message


def error_code(name: str):
    """Class decorator pinning the public error code."""

    def apply(cls):
        cls.code = name
        return cls

    return apply
