"""Traffic-grid forecasting pipeline toolkit.

Tensor I/O and the T4GR container, dataset slicing and folds, road masks,
temporal domain scaling, baseline predictors, ensembling, and MSE scoring,
wired together by a manifest-driven CLI.
"""

from .errors import (
    AlignmentError,
    BadMagicError,
    ConfigError,
    DimsOverflowError,
    GridcastError,
    PipelineError,
    ProtocolError,
    ShapeError,
    TensorFormatError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from .tensorio import (
    CANONICAL_SPEC,
    GridSpec,
    PredictionSet,
    Tensor,
    TrafficMovie,
    crop,
    pad,
    quantize_u8,
    read_movie,
    read_prediction_set,
    read_tensor,
    reshape_for_model,
    unshape,
    write_movie,
    write_prediction_set,
    write_tensor,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "BadMagicError",
    "CANONICAL_SPEC",
    "ConfigError",
    "DimsOverflowError",
    "GridSpec",
    "GridcastError",
    "PipelineError",
    "PredictionSet",
    "ProtocolError",
    "ShapeError",
    "Tensor",
    "TensorFormatError",
    "TrafficMovie",
    "TruncatedPayloadError",
    "VersionMismatchError",
    "crop",
    "pad",
    "quantize_u8",
    "read_movie",
    "read_prediction_set",
    "read_tensor",
    "reshape_for_model",
    "unshape",
    "write_movie",
    "write_prediction_set",
    "write_tensor",
]
