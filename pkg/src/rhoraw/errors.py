"""Exception hierarchy shared across the toolkit."""


class RhoRawError(Exception):
    """Base class for all toolkit errors."""


class InvalidMetadataError(RhoRawError):
    """Sensor metadata is inconsistent (e.g. saturation level <= black level)."""


class ShapeError(RhoRawError):
    """Image dimensions violate an operation's preconditions."""


class FileFormatError(RhoRawError):
    """A container file (.braw, .ppm, .ric) is malformed."""


class EstimationError(RhoRawError):
    """A parameter estimator received degenerate input."""


class DegeneratePairError(RhoRawError):
    """Latent gap below tolerance; variance loss is undefined."""


class SingularMatrixError(RhoRawError):
    """A mixed color-correction matrix is not invertible."""


class CorruptInputError(RhoRawError):
    """Encoder input violates the declared sample range."""


class RicDecodeError(FileFormatError):
    """Base class for structured bitstream decode failures."""


class BadMagicError(RicDecodeError):
    """Stream does not start with the expected magic/version."""


class TruncatedStreamError(RicDecodeError):
    """Stream ends inside a scale section."""

    def __init__(self, scale: int, message: str | None = None):
        self.scale = scale
        super().__init__(message or f"stream truncated inside scale {scale}")


class ChecksumError(RicDecodeError):
    """Per-scale CRC32 mismatch (range-coder desync or corruption)."""

    def __init__(self, scale: int, message: str | None = None):
        self.scale = scale
        super().__init__(message or f"checksum mismatch in scale {scale}")
