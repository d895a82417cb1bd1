"""
Exception hierarchy shared by every stage of the pipeline.

The CLI maps each family to an exit code: configuration/usage problems
exit with 2, bad input data with 3 and numerical failures with 4.
"""

from typing import Optional


class CataFieldError(Exception):
    """Base class for all errors raised by cata_field."""

    exit_code = 1


class ConfigError(CataFieldError, ValueError):
    """Invalid configuration, unknown keys or bad command-line usage."""

    exit_code = 2


class DataError(CataFieldError, ValueError):
    """Input data is missing, malformed or inconsistent."""

    exit_code = 3


class GeometryError(DataError):
    """A geometric precondition does not hold (non-unit vector, point behind camera, ...)."""


class NumericalError(CataFieldError, ArithmeticError):
    """A numerical procedure failed or produced unusable values."""

    exit_code = 4


class DegenerateConfigurationError(NumericalError):
    """A linear system is rank deficient (e.g. collinear calibration points)."""

    def __init__(self, message: str, condition_number: float):
        """Initialize the error.

        Args:
            message: Human readable description of the degenerate condition.
            condition_number: Condition number of the offending system.
        """
        super().__init__(f"{message} (condition number {condition_number:.3e})")
        self.condition_number = condition_number


class NonFiniteError(NumericalError):
    """A loss, activation or gradient contains NaN or infinity."""

    def __init__(self, component: str, detail: Optional[str] = None):
        """Initialize the error.

        Args:
            component: Name of the offending quantity (e.g. a parameter key).
            detail: Optional extra context.
        """
        message = f"non-finite values in {component}"
        if detail:
            message += f": {detail}"
        super().__init__(message)
        self.component = component


class TrainingDivergedError(NumericalError):
    """The photometric loss exceeded the divergence guard."""

    def __init__(self, epoch: int, loss: float, reference: float, factor: float):
        """Initialize the error.

        Args:
            epoch: Epoch in which the guard fired.
            loss: Mean photometric loss of the offending epoch.
            reference: Mean photometric loss of the first epoch.
            factor: Allowed multiple of the reference.
        """
        super().__init__(
            f"training diverged in epoch {epoch}: L_c={loss:.6g} exceeds "
            f"{factor:g} x first-epoch mean {reference:.6g}"
        )
        self.epoch = epoch
        self.loss = loss
        self.reference = reference
        self.factor = factor
