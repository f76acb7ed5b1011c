"""Exception hierarchy shared by every module of the package."""

from typing import Optional


class PLRNError(ValueError):
    """Base class for validation errors raised by plrn_grounding."""


class ShapeError(PLRNError):
    """Operands have incompatible shapes."""


class ConfigurationError(PLRNError):
    """A configuration value is invalid or inconsistent."""


class ContractError(PLRNError):
    """A function was called outside its documented preconditions."""


class DegenerateMaskError(PLRNError):
    """A masked softmax has no unmasked entry along its axis."""


class TrainingStateError(PLRNError):
    """Optimizer state is incomplete (e.g. gradients were never populated)."""


class EmptyQueryError(PLRNError):
    """A sentence query has no tokens after normalization."""


class InputError(PLRNError):
    """Raw input data is unusable."""


class DataError(PLRNError):
    """Annotation or dataset content is invalid."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ParseError(DataError):
    """An annotation line does not match the expected grammar."""


class EmptyEvaluationError(PLRNError):
    """Metrics were requested over an empty set of samples."""


class CompatibilityError(PLRNError):
    """A checkpoint does not match the model configuration."""

    def __init__(self, field: str, expected: object, found: object):
        super().__init__(f"checkpoint mismatch on '{field}': expected {expected}, found {found}")
        self.field = field


class TrainingDivergedError(PLRNError):
    """The training loss became non-finite."""
