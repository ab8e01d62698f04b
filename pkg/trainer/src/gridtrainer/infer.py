"""Inference to the prediction-file protocol: one `<slot_id>.t4gr` per
test slot, dims [t_out*C, H, W], values clipped to [0, 255]."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from . import t4gr
from .unet import UNet, crop_back, pad_for_model


class ProtocolWriteError(OSError):
    """A slot file could not be written."""


def predict_one(model: UNet, window: np.ndarray) -> np.ndarray:
    """[K, H, W] input -> [K', H, W] clipped f32 prediction at original size."""
    model.eval()
    x = torch.from_numpy(np.ascontiguousarray(window, dtype=np.float32)).unsqueeze(0)
    padded, size = pad_for_model(x, model.cfg)
    with torch.no_grad():
        y = crop_back(model(padded), size)
    out = y.squeeze(0).numpy()
    return np.clip(out, 0.0, 255.0).astype(np.float32)


def infer_to_protocol(model: UNet, inputs: np.ndarray, slots, protocol_dir) -> list[Path]:
    """Write one prediction file per slot; returns the paths written."""
    if inputs.ndim != 4 or inputs.shape[0] != len(slots):
        raise ValueError(
            f"inputs {inputs.shape} do not line up with {len(slots)} slots"
        )
    directory = Path(protocol_dir)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for i, slot in enumerate(slots):
        pred = predict_one(model, inputs[i])
        path = directory / f"{slot}.t4gr"
        try:
            t4gr.write(pred, path)
        except OSError as exc:
            raise ProtocolWriteError(f"slot {slot}: {exc}") from exc
        written.append(path)
    return written
