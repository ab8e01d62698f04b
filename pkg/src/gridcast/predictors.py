"""Baseline predictors, the external prediction-file protocol, and
pseudo-label dataset construction.

The external protocol is the sole bridge to out-of-process models: a
directory holding one `<slot_id>.t4gr` file per test slot with dims
[t_out*C, H, W]. Anything that can write those files can plug in.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import AlignmentError, ConfigError, ProtocolError, ShapeError, TensorFormatError
from .tda import MeanMap
from .tensorio import GridSpec, PredictionSet, Tensor, quantize_u8, read_tensor


class PredictorKind(str, Enum):
    PERSISTENCE = "persistence"
    HISTORICAL_MEAN = "historical_mean"
    EXTERNAL = "external"


@dataclass(frozen=True, eq=True)
class PredictorSpec:
    """One predictor in a pipeline; external kinds carry their protocol dir."""

    kind: PredictorKind
    protocol_dir: str | None = None

    def __post_init__(self):
        if self.kind is PredictorKind.EXTERNAL and not self.protocol_dir:
            raise ConfigError("external predictor needs a protocol directory")
        if self.kind is not PredictorKind.EXTERNAL and self.protocol_dir:
            raise ConfigError(f"{self.kind.value} predictor takes no protocol directory")

    @property
    def name(self) -> str:
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "PredictorSpec":
        """`persistence`, `historical_mean`, or `external:<dir>`."""
        kind, _, arg = text.partition(":")
        try:
            parsed = PredictorKind(kind.strip())
        except ValueError:
            raise ConfigError(f"unknown predictor kind {kind!r}") from None
        return cls(kind=parsed, protocol_dir=arg.strip() or None)

    def __str__(self) -> str:
        if self.kind is PredictorKind.EXTERNAL:
            return f"external:{self.protocol_dir}"
        return self.kind.value


@dataclass(frozen=True)
class PseudoLabelSet:
    """Self-labeled training pairs built from a model's own predictions."""

    pairs: tuple[tuple[Tensor, Tensor], ...]
    source_model: str

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("pseudo-label set needs at least one pair")
        in_dims = self.pairs[0][0].dims
        out_dims = self.pairs[0][1].dims
        for inp, target in self.pairs:
            if inp.dims != in_dims or target.dims != out_dims:
                raise ValueError("pseudo-label pairs must share one grid shape")
            if inp.dtype != "u8" or target.dtype != "u8":
                raise ValueError("pseudo-label pairs must be u8")


def predict_persistence(inputs: Tensor, t_out: int = 6, channels: int = 8) -> Tensor:
    """Repeat the last input frame for every forecast horizon.

    Output channels [k*C, (k+1)*C) are a bit-exact copy of the last C
    input channels, for every k.
    """
    if len(inputs.dims) != 3:
        raise ShapeError(f"expected dims [t_in*C, H, W], got {inputs.dims}")
    k, h, w = inputs.dims
    if k % channels:
        raise ShapeError(f"channel axis {k} is not a multiple of {channels}")
    last = inputs.data[k - channels :]
    out = np.tile(last, (t_out, 1, 1))
    return Tensor._adopt(np.ascontiguousarray(out))


def predict_historical_mean(
    mean: MeanMap, t_out: int = 6, quantize: bool = False
) -> Tensor:
    """Emit the per-pixel climatology for every forecast horizon."""
    out = Tensor(np.tile(mean.values.data, (t_out, 1, 1)))
    return quantize_u8(out) if quantize else out


def protocol_path(protocol_dir, slot: str) -> Path:
    return Path(protocol_dir) / f"{slot}.t4gr"


def run_external(
    slots: Sequence[str], protocol_dir, spec: GridSpec
) -> PredictionSet:
    """Assemble a PredictionSet from `<slot_id>.t4gr` files in slot order.

    Missing files raise a ProtocolError listing every absent slot; a file
    with wrong dims raises a TensorFormatError naming it. Unrelated files
    in the directory are ignored. Mixed u8/f32 slot files widen to f32.
    """
    slots = tuple(str(s) for s in slots)
    missing = [s for s in slots if not protocol_path(protocol_dir, s).exists()]
    if missing:
        raise ProtocolError(
            f"missing prediction files in {protocol_dir} for slots: "
            + ", ".join(missing)
        )
    expected = (spec.output_channels, spec.height, spec.width)
    loaded = []
    for slot in slots:
        path = protocol_path(protocol_dir, slot)
        t = read_tensor(path)
        if t.dims != expected:
            raise TensorFormatError(f"{path}: expected dims {expected}, got {t.dims}")
        loaded.append(t)
    if all(t.dtype == "u8" for t in loaded):
        stack = np.stack([t.data for t in loaded])
    else:
        stack = np.stack([t.data.astype(np.float32) for t in loaded])
    return PredictionSet(spec=spec, slots=slots, values=Tensor._adopt(stack))


def build_pseudo_labels(
    inputs: Sequence[tuple[str, Tensor]],
    predictions: PredictionSet,
    source_model: str = "external",
) -> PseudoLabelSet:
    """Pair each input window with the quantized prediction for its slot.

    Inputs and predictions must list the same slot ids in the same order;
    prediction values are clipped to [0, 255] and rounded half-up first.
    """
    input_slots = tuple(str(slot) for slot, _ in inputs)
    if input_slots != predictions.slots:
        raise AlignmentError(
            f"input slots {input_slots} != prediction slots {predictions.slots}"
        )
    targets = quantize_u8(predictions.values)
    pairs = []
    for i, (_, window) in enumerate(inputs):
        if window.dtype != "u8":
            raise ValueError("pseudo-label inputs must be u8 windows")
        pairs.append((window, Tensor._adopt(targets.data[i].copy())))
    return PseudoLabelSet(pairs=tuple(pairs), source_model=source_model)
