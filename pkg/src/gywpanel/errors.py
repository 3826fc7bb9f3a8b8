"""Exception taxonomy shared across the package.

The split mirrors the CLI exit-code classes: configuration problems,
malformed input data, and numerical failures raised during computation.
Precondition violations on in-memory arguments raise plain ValueError.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """A run configuration document is malformed or inconsistent."""


class DataFormatError(ValueError):
    """An input file exists but cannot be parsed into a valid object."""


class NumericalError(RuntimeError):
    """A computation failed for numerical reasons."""


class SingularSystemError(NumericalError):
    """A matrix that must be inverted or solved is singular or near-singular."""


class NonStationaryError(NumericalError):
    """An operation that requires a stable transition was given an unstable one."""
