"""Exception hierarchy shared across the package.

Everything raised on a domain-level failure derives from FieldStegError so
callers (and the CLI) can distinguish usage mistakes from channel failures.
"""


class FieldStegError(Exception):
    """Base class for all domain errors raised by this package."""


class ShapeError(FieldStegError):
    """Operand dimensions do not match a layer or model contract."""


class SingularMatrixError(FieldStegError):
    """Pivot fell below the singularity threshold during elimination."""


class ActivationDomainError(FieldStegError):
    """Inverse activation evaluated outside its mathematical domain."""


class NotInvertibleAtPointError(FieldStegError):
    """Value sits on a flat activation segment and has no preimage."""


class TrainingError(FieldStegError):
    """Training aborted; carries the partial report when available."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InitError(FieldStegError):
    """Model initialization could not produce full-rank weights."""


class ModelFormatError(FieldStegError):
    """Model file is corrupt, truncated, or has an unsupported version."""


class FlatSegmentOutputError(FieldStegError):
    """Generator emitted a value on the clipped activation floor."""


class IngestionError(FieldStegError):
    """Dataset file yielded no usable records."""


class FilterError(FieldStegError):
    """Digit-length filter removed every record."""


class NormalizationRangeError(FieldStegError):
    """Value lies outside the [min, max] range of the normalization."""


class BatchingError(FieldStegError):
    """Not enough values to form one complete group."""


class RecoveryError(FieldStegError):
    """Magnitude recovery failed (empty suffix table)."""


class LayoutError(FieldStegError):
    """Bit string length does not match the noise layout."""


class CodecRangeError(FieldStegError):
    """Noise value falls outside [-1, 1] beyond the clamp tolerance."""


class EncodingTimeoutError(FieldStegError):
    """Embed/verify loop exhausted its attempt budget."""

    def __init__(self, message, attempts=0):
        super().__init__(message)
        self.attempts = attempts


class ChunkHeaderError(FieldStegError):
    """Payload stream header is missing or inconsistent."""


class BuildError(FieldStegError):
    """Transaction construction rejected its inputs."""


class ExtractionError(FieldStegError):
    """Chain selector matched no transactions."""


class ChainFormatError(FieldStegError):
    """Chain file violates the append-only JSONL schema."""


class ChannelStageError(FieldStegError):
    """A round-trip stage failed; .stage names which one."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
