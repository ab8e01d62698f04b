"""Temporal domain scaling between two traffic-data years.

The bridge is a per-pixel, per-channel ratio field computed from yearly
mean maps:

    lam = mean_train / mean_test     (element-wise)
    lam = 1 where mean_test == 0
    lam = 1 where lam < 1            (traffic did not increase in the test year)

Inputs are multiplied by lam before inference and predictions by 1/lam
after, so models only ever see data shaped like the training year. All
math runs in f32 end-to-end; clipping and u8 rounding happen only when a
caller asks for quantized output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, TensorFormatError
from .tensorio import (
    PredictionSet,
    Tensor,
    TrafficMovie,
    quantize_u8,
    read_tensor,
    write_tensor,
)


@dataclass(frozen=True, eq=True)
class MeanMap:
    """Per-pixel per-channel arithmetic mean of every frame in one year."""

    values: Tensor
    frame_count: int
    year_label: str

    def __post_init__(self):
        if self.values.dtype != "f32" or len(self.values.dims) != 3:
            raise ValueError(f"mean map must be a 3-d f32 tensor, got {self.values!r}")
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        data = self.values.data
        if data.size and (data.min() < 0 or data.max() > 255):
            raise ValueError("mean map elements must lie in [0, 255]")


@dataclass(frozen=True, eq=True)
class LambdaMap:
    """Ratio field [C, H, W]; every element is finite and >= 1."""

    values: Tensor

    def __post_init__(self):
        if self.values.dtype != "f32" or len(self.values.dims) != 3:
            raise ValueError(f"lambda map must be a 3-d f32 tensor, got {self.values!r}")
        if self.values.data.size and self.values.data.min() < 1.0:
            raise ValueError("lambda elements must be >= 1")


def mean_map(movies: list[TrafficMovie], year_label: str = "") -> MeanMap:
    """Average all frames of all movies at each (c, h, w), f64 accumulation."""
    if not movies:
        raise ConfigError("mean_map needs at least one movie")
    first = movies[0].spec
    shape = (first.channels, first.height, first.width)
    total = np.zeros(shape, dtype=np.float64)
    count = 0
    for movie in movies:
        if (movie.spec.channels, movie.spec.height, movie.spec.width) != shape:
            raise ShapeError(f"movie {movie.city!r} grid differs from {first}")
        total += movie.frames.data.sum(axis=0, dtype=np.float64)
        count += movie.frame_count
    mean = (total / count).astype(np.float32)
    return MeanMap(values=Tensor._adopt(mean), frame_count=count, year_label=year_label)


def compute_lambda(m_train: MeanMap, m_test: MeanMap) -> LambdaMap:
    """Element-wise train/test ratio with the zero and <1 rules applied."""
    if m_train.values.dims != m_test.values.dims:
        raise ShapeError(
            f"mean map dims differ: {m_train.values.dims} vs {m_test.values.dims}"
        )
    train = m_train.values.data.astype(np.float64)
    test = m_test.values.data.astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = train / test
    lam[test == 0] = 1.0
    lam[lam < 1.0] = 1.0
    # Ratios of in-range means stay far below the f32 ceiling in practice;
    # clamp anyway so the finiteness invariant survives the cast.
    lam = np.minimum(lam, np.finfo(np.float32).max)
    return LambdaMap(values=Tensor._adopt(lam.astype(np.float32)))


def _tiled(field: np.ndarray, channel_axis: int, h: int, w: int) -> np.ndarray:
    c = field.shape[0]
    if channel_axis % c:
        raise ShapeError(
            f"channel axis {channel_axis} is not a multiple of lambda channels {c}"
        )
    if field.shape[1:] != (h, w):
        raise ShapeError(
            f"spatial dims {(h, w)} != lambda spatial dims {field.shape[1:]}"
        )
    return np.tile(field, (channel_axis // c, 1, 1))


def apply_lambda(t: Tensor, lam: LambdaMap, quantize: bool = False) -> Tensor:
    """Multiply a [K, H, W] (or [N, K, H, W]) tensor by lam, channel c -> c mod C.

    Returns f32, or clipped-and-rounded u8 when `quantize` is set.
    """
    if len(t.dims) not in (3, 4):
        raise ShapeError(f"expected dims [K, H, W] or [N, K, H, W], got {t.dims}")
    k, h, w = t.dims[-3:]
    scale = _tiled(lam.values.data, k, h, w)
    out = Tensor(t.data.astype(np.float32) * scale)
    return quantize_u8(out) if quantize else out


def invert_lambda(lam: LambdaMap) -> Tensor:
    """Element-wise reciprocal; a zero element maps to 1 (defensive rule)."""
    values = lam.values.data
    inv = np.where(values == 0, np.float32(1.0), np.float32(1.0) / values)
    return Tensor._adopt(inv.astype(np.float32))


def apply_inverse_lambda(
    pred: PredictionSet, lam: LambdaMap, quantize: bool = False
) -> PredictionSet:
    """Scale predictions back to the test-year distribution (multiply by 1/lam)."""
    _, k, h, w = pred.values.dims
    scale = _tiled(invert_lambda(lam).data, k, h, w)
    out = Tensor(pred.values.data.astype(np.float32) * scale)
    if quantize:
        out = quantize_u8(out)
    return PredictionSet(spec=pred.spec, slots=pred.slots, values=out)


def write_lambda(lam: LambdaMap, path) -> None:
    write_tensor(lam.values, path)


def read_lambda(path) -> LambdaMap:
    t = read_tensor(path)
    if len(t.dims) != 3 or t.dtype != "f32":
        raise TensorFormatError(
            f"{path}: lambda file must be 3-d f32, got dims {t.dims} dtype {t.dtype}"
        )
    if t.data.size and t.data.min() < 1.0:
        raise TensorFormatError(f"{path}: lambda elements must be >= 1")
    return LambdaMap(values=t)
