"""Exception types shared by the flow modules.

Each class maps to a distinct process exit code in the command line front end.
"""

from __future__ import annotations


class RGQMError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class ConfigError(RGQMError):
    """Invalid run configuration. ``path`` names the offending field."""

    exit_code = 3

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


class ConvexityError(RGQMError):
    """The log argument of a mode integration dropped below the guard.

    This is the sharp-cutoff spinodal instability: the integrated mode has a
    non-positive Gaussian weight. ``trace`` carries the partial flow history
    when the error escapes a full flow run.
    """

    exit_code = 4

    def __init__(self, m: int, x0=None, value: float | None = None, trace=None):
        self.m = m
        self.x0 = x0
        self.value = value
        self.trace = trace
        where = "" if x0 is None else f" at x0={x0!r}"
        val = "" if value is None else f" (log argument {value:.6g})"
        super().__init__(f"non-positive mode weight at m={m}{where}{val}")


class NonConvergence(RGQMError):
    """An iterative or basis-size study failed to meet its tolerance."""

    exit_code = 5

    def __init__(self, message: str, estimate: float | None = None):
        self.estimate = estimate
        super().__init__(message)


class QuadratureNonConvergence(NonConvergence):
    """Numerical integration error estimate exceeded the requested bound."""


class NegativeGapError(RGQMError):
    """The flowed mass term at m=0 is negative, so no real gap exists."""

    exit_code = 6

    def __init__(self, g2: float):
        self.g2 = g2
        super().__init__(f"negative curvature at the end of the flow: {g2:.6g}")
