"""Exception hierarchy shared by every module of the package."""


class ChoquardError(Exception):
    """Base class for all package errors."""


class InvalidParams(ChoquardError, ValueError):
    pass


class RegimeUnsupported(ChoquardError):
    pass


class RegimeViolation(ChoquardError):
    pass


class QuadratureFailure(ChoquardError):
    pass


class SolverDiverged(ChoquardError):
    pass


class MaxIterExceeded(SolverDiverged):
    pass


class LeftBasin(SolverDiverged):
    """Plus-branch iterate escaped V(a) = {A < k1}."""


class UnsupportedDimension(ChoquardError, ValueError):
    pass


class GridMismatch(ChoquardError, ValueError):
    pass


class GridTooCoarse(ChoquardError, ValueError):
    pass


class ScaleOutOfRange(ChoquardError, ValueError):
    pass


class ZeroField(ChoquardError, ValueError):
    pass


class DomainError(ChoquardError, ValueError):
    pass


class BracketFailure(ChoquardError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class BranchUnavailable(ChoquardError):
    pass
