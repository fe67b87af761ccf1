"""Exception types raised across the package."""

from __future__ import annotations


class SwapcalError(Exception):
    """Base class for every error raised by swapcal."""


class MissingPoint(SwapcalError, KeyError):
    """A support point of the distribution has no value in a table."""


class EmptyLevelSet(SwapcalError, ValueError):
    """The requested prediction value carries no mass."""


class EmptyInput(SwapcalError, ValueError):
    pass


class BadLabel(SwapcalError, ValueError):
    pass


class UnknownLoss(SwapcalError, ValueError):
    pass


class BadGLM(SwapcalError, ValueError):
    """The link function's derivative does not cover [0, 1]."""


class UnknownMember(SwapcalError, KeyError):
    pass


class EmptyClass(SwapcalError, ValueError):
    pass


class EmptyCompetitors(SwapcalError, ValueError):
    pass


class GridTooLarge(SwapcalError, ValueError):
    pass


class BadDelta(SwapcalError, ValueError):
    pass


class ParseError(SwapcalError, ValueError):
    """An input file could not be read or does not match its schema."""


class VerificationFailed(SwapcalError, RuntimeError):
    pass


class DidNotConverge(SwapcalError, RuntimeError):
    """MCBoost hit its iteration cap (or stalled) before reaching the target.

    The partial trace is attached so callers can still emit it.
    """

    def __init__(self, max_iterations: int, final_smce: float, trace=None, reason: str = "iteration cap"):
        self.max_iterations = max_iterations
        self.final_smce = final_smce
        self.trace = trace
        self.reason = reason
        super().__init__(
            f"MCBoost did not converge ({reason}) after {max_iterations} iterations; "
            f"final sMCE {final_smce:.6g}"
        )
