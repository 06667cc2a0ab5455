"""Exception hierarchy shared by all solver layers."""

from __future__ import annotations


class HybridJumpError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(HybridJumpError, ValueError):
    """Inputs violate a documented precondition (dimensions, ordering, ...)."""


class NotFound(HybridJumpError, KeyError):
    def __init__(self, name: str, available):
        self.name = name
        self.available = sorted(available)
        super().__init__(f"unknown problem {name!r}; available: {', '.join(self.available)}")

    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return self.args[0]


class StationarityFailure(HybridJumpError):
    """Newton on dH/du = 0 did not converge."""

    def __init__(self, message: str, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class StepBudgetExceeded(HybridJumpError):
    pass


class NumericalBlowup(HybridJumpError):
    def __init__(self, message: str, t=None):
        super().__init__(message)
        self.t = t


class TangentialCrossing(HybridJumpError):
    """The jump-law denominator vanishes: the trajectory grazes the interface."""

    def __init__(self, message: str, denominator: float | None = None):
        super().__init__(message)
        self.denominator = denominator


class BvpDiverged(HybridJumpError):
    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class SingularJacobian(HybridJumpError):
    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class InnerFailure(HybridJumpError):
    """An inner boundary-value solve failed during the switching-time iteration."""

    def __init__(self, message: str, trace=None, cause: Exception | None = None):
        super().__init__(message)
        self.trace = trace
        self.cause = cause


class DerivativeVanished(HybridJumpError):
    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class OracleExhausted(HybridJumpError):
    pass


class ProblemFileError(HybridJumpError, ValueError):
    """A problem file could not be parsed; carries the offending location."""

    def __init__(self, message: str, path=None, field: str | None = None, line: int | None = None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        prefix = ": ".join([", ".join(loc)]) + ": " if loc else ""
        super().__init__(prefix + message)
        self.message = message
        self.path = path
        self.field = field
        self.line = line
