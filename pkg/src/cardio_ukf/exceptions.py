"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class CardioUKFError(Exception):
    """Base class for all package errors."""


class DomainError(CardioUKFError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class SolverError(CardioUKFError):
    """Base class for integration failures; carries the failure time."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class SolverDiverged(SolverError):
    pass


class NonPhysiological(SolverError):
    pass


class NotConverged(SolverError):
    pass


class CovarianceNotPSD(CardioUKFError):
    pass


class InnovationNotPSD(CardioUKFError):
    pass


class SigmaPropagationFailed(CardioUKFError):
    def __init__(self, message: str, index: int, cause: Exception | None = None):
        super().__init__(message)
        self.index = index
        self.cause = cause


class FilterFailed(CardioUKFError):
    """A filter run aborted; ``trace`` holds every iteration completed before the failure."""

    def __init__(self, message: str, trace, cause: Exception | None = None):
        super().__init__(message)
        self.trace = trace
        self.cause = cause


class EnsembleInfeasible(CardioUKFError):
    pass


class ConfigError(CardioUKFError, ValueError):
    pass
