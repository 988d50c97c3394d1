"""Exception types shared across the package."""


class TaskShapeError(Exception):
    """Base class for all package errors."""


class ZeroVectorError(TaskShapeError):
    """A vector required to be nonzero is (numerically) zero."""


class DimMismatchError(TaskShapeError):
    """Two vectors that must share a dimension do not."""


class NonFiniteError(TaskShapeError):
    """A scalar or vector contains NaN or infinity."""


class InsufficientDataError(TaskShapeError):
    """Not enough observations to compute the requested statistic."""


class TooShortError(TaskShapeError):
    """A sequence is shorter than the operation requires."""


class DegenerateNoiseError(TaskShapeError):
    """Noise energy is zero, so an SNR ratio is undefined."""


class BadDimensionError(TaskShapeError):
    """Embedding dimension too small for the requested construction."""


class EmptyOffsetsError(TaskShapeError):
    """A viewpoint model was given no camera offsets."""


class InvalidActionError(TaskShapeError):
    """Action not in the environment's action set."""


class EmptyBatchError(TaskShapeError):
    """A loss was evaluated on an empty batch."""


class DivergedError(TaskShapeError):
    """Training produced a non-finite loss."""


class ConfigError(TaskShapeError):
    """Configuration file contains unknown keys or out-of-range values."""


class DatasetFormatError(TaskShapeError):
    """Base for embedding-dataset file format violations."""


class BadMagicError(DatasetFormatError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(DatasetFormatError):
    """File declares a format version this reader does not understand."""


class TruncatedError(DatasetFormatError):
    """File ended before the declared content was complete."""


class DuplicateIdError(DatasetFormatError):
    """Two entries share an id."""


class InvariantViolationError(DatasetFormatError):
    """Dataset violates a structural invariant (e.g. mixed dims)."""


class ManifestError(TaskShapeError):
    """Stage manifest is malformed or references unknown ids."""


class ClientError(TaskShapeError):
    """Base for embedding-service client failures."""


class NetworkError(ClientError):
    """Transport-level failure after exhausting retries."""


class BadResponseError(ClientError):
    """Service response does not match the documented schema."""


class MissingIdError(ClientError):
    """Service response omitted a requested id."""
