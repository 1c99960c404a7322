"""Exception types.

Numerical failures raise; "no certificate found" outcomes are also
exceptions but always carry diagnostics and never claim infeasibility.
"""
from __future__ import annotations


class CoopGameError(Exception):
    """Base class for all package errors."""


class ValidationError(CoopGameError, ValueError):
    """Invalid input data.  ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NotPSD(CoopGameError, ValueError):
    pass


class RankDeficient(CoopGameError, ValueError):
    pass


class NotHurwitz(CoopGameError):
    pass


class SingularSystem(CoopGameError):
    pass


class NoStabilizingSolution(CoopGameError):
    pass


class NotStructured(CoopGameError):
    pass


class SC1Violated(CoopGameError):
    pass


class NoIndividuallyRationalPoint(CoopGameError):
    pass


class Rejection(CoopGameError):
    """A gain could not be certified.  ``reason`` is a short tag."""

    reason = "Rejected"

    def __init__(self, message: str = "", diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message or self.reason)


class NotStabilizing(Rejection):
    reason = "NotStabilizing"


class MarginShortfall(Rejection):
    """No certificate within the solver budget.  Inconclusive."""

    reason = "MarginShortfall"


class Shortfall(CoopGameError):
    """Synthesis did not produce a certified gain.  Inconclusive.

    ``stage`` is one of ``"stage1"``, ``"stage2"``, ``"verify"``.
    """

    def __init__(self, stage: str, message: str = "", diagnostics: dict | None = None):
        self.stage = stage
        self.diagnostics = diagnostics or {}
        super().__init__(f"{stage}: {message}" if message else stage)


class AllShortfall(CoopGameError):
    def __init__(self, message: str = "", history: list | None = None):
        self.history = history or []
        super().__init__(message or "no grid value produced a certified gain")


class TailTooLarge(CoopGameError):
    """Trajectory has not decayed enough for the truncated cost integral."""
