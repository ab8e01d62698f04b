"""Prediction-set aggregation: mean, median, and mean-of-two-ensembles.

Mean accumulates in f64 over members sorted by content digest, so the
result is bit-identical under any member ordering. Output is always f32.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import AlignmentError, ConfigError, ShapeError
from .tensorio import PredictionSet, Tensor

AGGREGATORS = ("mean", "median")


def _check_members(members: Sequence[PredictionSet]) -> None:
    if len(members) < 2:
        raise ConfigError(f"ensemble needs at least 2 members, got {len(members)}")
    first = members[0]
    for m in members[1:]:
        if m.slots != first.slots:
            divergent = sorted(set(m.slots) ^ set(first.slots)) or ["(order differs)"]
            raise AlignmentError(
                "member slots diverge: " + ", ".join(str(s) for s in divergent)
            )
        if m.values.dims != first.values.dims:
            raise ShapeError(
                f"member dims diverge: {m.values.dims} vs {first.values.dims}"
            )


def _canonical_order(members: Sequence[PredictionSet]) -> list[int]:
    # Digest-sorted summation order makes the mean independent of how the
    # caller happened to list the members.
    return sorted(range(len(members)), key=lambda i: members[i].values.digest())


def ensemble(members: Sequence[PredictionSet], aggregator: str = "mean") -> PredictionSet:
    """Element-wise mean or median across members; f32 output, slots preserved."""
    if aggregator not in AGGREGATORS:
        raise ConfigError(f"unknown aggregator {aggregator!r}; choose from {AGGREGATORS}")
    _check_members(members)
    first = members[0]
    if aggregator == "mean":
        acc = np.zeros(first.values.dims, dtype=np.float64)
        for i in _canonical_order(members):
            acc += members[i].values.data
        out = (acc / len(members)).astype(np.float32)
    else:
        stack = np.stack([m.values.data.astype(np.float64) for m in members])
        out = np.median(stack, axis=0).astype(np.float32)
    return PredictionSet(spec=first.spec, slots=first.slots, values=Tensor(out))


def ensemble_of_ensembles(a: PredictionSet, b: PredictionSet) -> PredictionSet:
    """Combine two finished ensembles by their element-wise mean."""
    return ensemble([a, b], aggregator="mean")
