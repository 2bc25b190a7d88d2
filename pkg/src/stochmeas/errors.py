"""Exception types raised by the library."""

from __future__ import annotations


class StochMeasError(Exception):
    """Base class for all library errors."""


class DegenerateAmplitudes(StochMeasError, ValueError):
    pass


class BelowThreshold(StochMeasError, ValueError):
    pass


class EnumerationTooLarge(StochMeasError, ValueError):
    pass


class UnreachablePointer(StochMeasError, ValueError):
    pass


class CollinearSingularity(StochMeasError, ZeroDivisionError):
    pass


class NoData(StochMeasError, ValueError):
    pass


class ConfigError(StochMeasError, ValueError):
    """Invalid experiment configuration.

    ``path`` is the dotted location of the offending field, e.g. ``"eta"`` or
    ``"psi_squared[2]"``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")
