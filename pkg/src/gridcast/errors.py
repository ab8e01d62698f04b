"""Exception taxonomy shared by every gridcast module.

Each CLI exit code maps onto one of these classes, so keep the hierarchy
flat and additive.
"""


class GridcastError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(GridcastError):
    """Tensor dimensions do not satisfy an operation's contract."""


class ConfigError(GridcastError):
    """Invalid, incomplete, or unresolvable configuration."""


class AlignmentError(GridcastError):
    """Slot/city universes of two collections do not line up."""


class ProtocolError(GridcastError):
    """The external prediction-file protocol was violated."""


class PipelineError(GridcastError):
    """A pipeline stage failed; the message names the stage and file."""


class TensorFormatError(GridcastError):
    """Malformed tensor container file."""


class BadMagicError(TensorFormatError):
    """File does not start with the container magic bytes."""


class VersionMismatchError(TensorFormatError):
    """Container version is not one this reader understands."""


class TruncatedPayloadError(TensorFormatError):
    """File ends before the header or payload is complete."""


class DimsOverflowError(TensorFormatError):
    """An extent does not fit the container's u32 dimension field."""
