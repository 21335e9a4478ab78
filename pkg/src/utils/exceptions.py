"""
Custom exceptions for the scenario-tree lab.
"""
from typing import Sequence


class BDSVIELabException(Exception):
    """Base exception for the lab."""

    pass


class ConfigurationError(BDSVIELabException):
    """Raised when a grid, scenario or solver configuration is invalid."""

    pass


class HypothesisError(ConfigurationError):
    """Raised when declared constants violate the Lipschitz hypothesis of a variant."""

    pass


class MeasurabilityError(BDSVIELabException):
    """Raised when a field depends on coordinates outside its claimed sub-algebra."""

    pass


class IntegrandError(BDSVIELabException):
    """Raised when an integrand violates the adaptedness of its orientation."""

    pass


class StructuralInputError(BDSVIELabException):
    """Raised when a field is not of the form the mixed representation accepts."""

    pass


class IncompleteStateError(BDSVIELabException):
    """Raised when a frozen state lacks entries the driver needs."""

    pass


class StepSizeError(BDSVIELabException):
    """Raised when the implicit step does not contract (c * dt >= 1)."""

    pass


class PreconditionError(BDSVIELabException):
    """Raised when an estimate is requested for inputs that do not satisfy its premise."""

    pass


class ConvergenceError(BDSVIELabException):
    """Raised when the inner fixed-point iteration of a BDSDE step fails to converge."""

    pass


class NonConvergenceError(ConvergenceError):
    """Raised when the Picard iteration exceeds its iteration budget."""

    def __init__(self, message: str, history: Sequence[float] = (), ratios: Sequence[float] = ()):
        super().__init__(message)
        self.history = list(history)
        self.ratios = list(ratios)


class NonContractionError(ConvergenceError):
    """Raised when no admissible beta makes the Picard map contract."""

    def __init__(self, message: str, ratios: Sequence[float] = ()):
        super().__init__(message)
        self.ratios = list(ratios)
