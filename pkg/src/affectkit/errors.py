"""Exception types shared across the engine.

All engine errors derive from AffectError so callers can catch broadly;
the concrete classes also subclass ValueError to stay friendly to generic
validation handling.
"""


class AffectError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatchError(AffectError, ValueError):
    """Operands have incompatible dimensions."""


class DegenerateEmbeddingError(AffectError, ValueError):
    """An embedding with zero norm was used where a direction is required."""


class IngestError(AffectError, ValueError):
    """A record file could not be ingested."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateIdError(IngestError):
    """Two records share the same id."""


class EmptyDatabaseError(AffectError, ValueError):
    """An operation that needs at least one record got an empty database."""


class UndefinedCorrelationError(AffectError, ValueError):
    """Correlation is undefined because one series has zero variance.

    MAE is still well defined in this situation, so the raiser attaches it.
    """

    def __init__(self, message: str, mae: float | None = None):
        self.mae = mae
        super().__init__(message)


class ConfigError(AffectError, ValueError):
    """A configuration value or combination is invalid."""


class MatrixError(AffectError, ValueError):
    """A matrix does not satisfy a required property (symmetry, PD, ...)."""


class NumericError(AffectError, ArithmeticError):
    """A computation produced non-finite values."""
