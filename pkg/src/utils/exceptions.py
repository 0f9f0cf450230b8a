"""Custom exceptions for the application."""
from typing import Any, Optional


class GeoShiftError(Exception):
    """Base exception for all geoshift errors."""
    pass


class ConfigError(GeoShiftError):
    """Configuration related errors."""
    pass


class ValidationError(GeoShiftError):
    """Input or precondition violations."""
    pass


class SimulationError(GeoShiftError):
    """Gaussian field simulation errors."""
    pass


class VariogramFitError(GeoShiftError):
    """Variogram model fit did not converge."""

    def __init__(self, message: str, best_params: Optional[Any] = None) -> None:
        super().__init__(message)
        self.best_params = best_params


class NumericalInstabilityError(GeoShiftError):
    """Iterative solver stopped without satisfying its optimality conditions."""

    def __init__(
        self,
        message: str,
        best_iterate: Optional[Any] = None,
        residual: float = float("nan"),
    ) -> None:
        super().__init__(message)
        self.best_iterate = best_iterate
        self.residual = residual


class FoldError(GeoShiftError):
    """Fold construction or evaluation errors."""

    def __init__(self, message: str, fold_index: Optional[int] = None) -> None:
        super().__init__(message)
        self.fold_index = fold_index


class NotFittedError(GeoShiftError):
    """Model used before training."""
    pass


class IngestError(GeoShiftError):
    """CSV ingestion and cleaning errors."""
    pass
