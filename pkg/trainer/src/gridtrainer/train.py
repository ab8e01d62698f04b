"""Training loop: Adam, MSE loss, linear warm-up, divergence abort, and
checkpointing that reloads to the identical model."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .unet import TrainConfig, UNet, build_model, lr_schedule


class DivergenceError(RuntimeError):
    """Loss went non-finite; carries the last finite loss seen."""

    def __init__(self, step: int, last_finite_loss: float):
        super().__init__(
            f"loss diverged at step {step}; last finite loss {last_finite_loss:.6g}"
        )
        self.step = step
        self.last_finite_loss = last_finite_loss


@dataclass
class TrainResult:
    model: UNet
    losses: list[float]
    best_val_loss: float | None
    best_state: dict | None


def _as_tensor(x) -> torch.Tensor:
    arr = np.ascontiguousarray(x)
    if not arr.flags.writeable:
        arr = arr.copy()  # torch.from_numpy rejects read-only buffers
    return torch.from_numpy(arr)


def evaluate(model: UNet, batches) -> float:
    """Mean MSE over (input, target) numpy batch pairs, f64 accumulation."""
    model.eval()
    total = 0.0
    count = 0
    with torch.no_grad():
        for inputs, targets in batches:
            pred = model(_as_tensor(inputs))
            diff = pred.double() - _as_tensor(targets).double()
            total += float((diff * diff).sum())
            count += diff.numel()
    if count == 0:
        raise ValueError("evaluate needs at least one batch")
    return total / count


def train(
    batch_iter,
    cfg: TrainConfig,
    steps: int | None = None,
    val_batches: list | None = None,
    model: UNet | None = None,
    log=None,
) -> TrainResult:
    """Run `steps` optimizer updates over batches from `batch_iter`.

    Keeps the best-validation state when `val_batches` is given (evaluated
    every 50 steps and at the end). Aborts on a non-finite loss.
    """
    steps = cfg.steps if steps is None else steps
    torch.manual_seed(cfg.seed)
    if model is None:
        model = build_model(cfg, seed=cfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr_schedule(0, cfg))
    loss_fn = nn.MSELoss()

    losses: list[float] = []
    last_finite = math.inf
    best_val = None
    best_state = None
    model.train()
    for step in range(steps):
        lr = lr_schedule(step, cfg)
        for group in optimizer.param_groups:
            group["lr"] = lr
        inputs, targets = next(batch_iter)
        pred = model(_as_tensor(inputs))
        loss = loss_fn(pred, _as_tensor(targets))
        value = float(loss.detach())
        if not math.isfinite(value):
            raise DivergenceError(step, last_finite)
        last_finite = value
        losses.append(value)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        if log is not None and step % 50 == 0:
            log(f"step {step:6d}  lr {lr:.2e}  loss {value:.6f}")
        if val_batches and (step % 50 == 49 or step == steps - 1):
            val = evaluate(model, val_batches)
            model.train()
            if best_val is None or val < best_val:
                best_val = val
                best_state = {
                    k: v.detach().clone() for k, v in model.state_dict().items()
                }
    return TrainResult(
        model=model, losses=losses, best_val_loss=best_val, best_state=best_state
    )


def save_checkpoint(model: UNet, path, step: int = 0) -> None:
    payload = {
        "config": asdict(model.cfg),
        "state_dict": model.state_dict(),
        "step": step,
    }
    torch.save(payload, path)


def load_checkpoint(path) -> UNet:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    cfg_dict = dict(payload["config"])
    cfg_dict["pad_to"] = tuple(cfg_dict["pad_to"])
    model = UNet(TrainConfig(**cfg_dict))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
