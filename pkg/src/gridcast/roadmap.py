"""Binary road masks: built from observed traffic, merged, and multiplied
onto predictions as post-processing."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, ShapeError, TensorFormatError
from .tensorio import PredictionSet, Tensor, TrafficMovie, read_tensor, write_tensor


class MaskProvenance(str, Enum):
    ORGANIZER_STATIC = "organizer_static"
    TRAIN_2019 = "train_2019"
    TRAIN_PLUS_TEST = "train_plus_test"


@dataclass(frozen=True, eq=True)
class RoadMask:
    """H x W u8 grid of {0, 1}: pixels that ever carried traffic."""

    grid: Tensor
    provenance: MaskProvenance

    def __post_init__(self):
        if self.grid.dtype != "u8" or len(self.grid.dims) != 2:
            raise ValueError(f"mask must be a 2-d u8 tensor, got {self.grid!r}")
        if self.grid.data.max(initial=0) > 1:
            raise ValueError("mask elements must be 0 or 1")


def build_mask(
    movies: list[TrafficMovie],
    provenance: MaskProvenance = MaskProvenance.TRAIN_2019,
) -> RoadMask:
    """Mark (h, w) iff any frame, any channel is nonzero across all movies."""
    if not movies:
        raise ConfigError("build_mask needs at least one movie")
    first = movies[0].spec
    hits = np.zeros((first.height, first.width), dtype=bool)
    for movie in movies:
        if (movie.spec.height, movie.spec.width, movie.spec.channels) != (
            first.height,
            first.width,
            first.channels,
        ):
            raise ShapeError(
                f"movie {movie.city!r} grid {movie.spec} differs from {first}"
            )
        # OR-reduce over frames and channels; order-insensitive by construction.
        hits |= movie.frames.data.any(axis=(0, 1))
    return RoadMask(grid=Tensor._adopt(hits.astype(np.uint8)), provenance=provenance)


def union_masks(a: RoadMask, b: RoadMask) -> RoadMask:
    """Element-wise OR; the result is tagged as train-plus-test coverage."""
    if a.grid.dims != b.grid.dims:
        raise ShapeError(f"mask dims differ: {a.grid.dims} vs {b.grid.dims}")
    merged = (a.grid.data | b.grid.data).astype(np.uint8)
    return RoadMask(grid=Tensor._adopt(merged), provenance=MaskProvenance.TRAIN_PLUS_TEST)


def apply_mask(pred: PredictionSet, mask: RoadMask) -> PredictionSet:
    """Zero every off-road pixel across all slots and channels; dtype-preserving."""
    if pred.values.dims[-2:] != mask.grid.dims:
        raise ShapeError(
            f"prediction spatial dims {pred.values.dims[-2:]} != mask {mask.grid.dims}"
        )
    gate = mask.grid.data.astype(pred.values.data.dtype)
    out = pred.values.data * gate
    return PredictionSet(spec=pred.spec, slots=pred.slots, values=Tensor._adopt(out))


def import_external_mask(path) -> RoadMask:
    """Load an organizer-style mask file; any nonzero value becomes 1."""
    t = read_tensor(path)
    if len(t.dims) != 2 or t.dtype != "u8":
        raise TensorFormatError(
            f"{path}: external mask must be 2-d u8, got dims {t.dims} dtype {t.dtype}"
        )
    grid = (t.data > 0).astype(np.uint8)
    return RoadMask(grid=Tensor._adopt(grid), provenance=MaskProvenance.ORGANIZER_STATIC)


def export_mask(mask: RoadMask, path) -> None:
    write_tensor(mask.grid, path)
