"""Exception hierarchy shared by every module."""


class DSRLError(Exception):
    """Base class for all package errors."""


class DimensionError(DSRLError, ValueError):
    pass


class GeometryError(DSRLError, ValueError):
    """A point or vector violates a manifold constraint."""


class DomainError(DSRLError, ValueError):
    """Input outside the domain of a differentiable op (e.g. arccosh < 1)."""


class ContractError(DSRLError, ValueError):
    """Caller broke an operation precondition."""


class NumericError(DSRLError, ArithmeticError):
    """Non-finite values appeared where finite ones are required."""


class DegenerateDirectionError(GeometryError):
    pass


class IsolatedNodeError(GeometryError):
    pass


class IngestionError(DSRLError, IOError):
    """Base for feature-file and checkpoint read failures."""

    def __init__(self, message, path=None):
        self.path = str(path) if path is not None else None
        if self.path:
            message = f"{self.path}: {message}"
        super().__init__(message)


class BadMagicError(IngestionError):
    pass


class VersionError(IngestionError):
    pass


class TruncationError(IngestionError):
    pass


class ChecksumError(IngestionError):
    pass


class ConfigError(DSRLError, ValueError):
    pass


class TrainingDivergedError(DSRLError, RuntimeError):
    pass
