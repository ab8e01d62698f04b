"""U-Net predictor: five encoder blocks with classic width doubling
(64 -> 1024 at full width, ~31M parameters), batch normalization after
every convolution, ReLU activations, and skip connections.

Spatial bookkeeping: the encoder halves resolution between blocks, so a
depth-d model needs both input dims divisible by 2^(d-1). The canonical
495x436 grid is padded to 496x448 — the next multiples of 16 — before
inference and cropped back after.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn


class TrainerConfigError(ValueError):
    """Invalid training or model configuration."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-4
    batch_size: int = 8
    warmup_steps: int = 1000
    depth: int = 5
    width_mult: float = 1.0
    pad_to: tuple[int, int] = (496, 448)
    precision: str = "full"
    encoder: str = "none"  # reserved; only the vanilla backbone is implemented
    in_channels: int = 96
    out_channels: int = 48
    steps: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise TrainerConfigError("learning_rate must be > 0")
        if self.warmup_steps < 0:
            raise TrainerConfigError("warmup_steps must be >= 0")
        if self.depth < 1:
            raise TrainerConfigError("depth must be >= 1")
        if self.width_mult <= 0:
            raise TrainerConfigError("width_mult must be > 0")
        if self.precision not in ("full", "mixed"):
            raise TrainerConfigError("precision must be 'full' or 'mixed'")
        if self.encoder != "none":
            raise TrainerConfigError(
                f"encoder {self.encoder!r} is reserved and not implemented"
            )
        if self.batch_size < 1 or self.steps < 0:
            raise TrainerConfigError("batch_size must be >= 1 and steps >= 0")
        divisor = self.spatial_divisor
        for dim in self.pad_to:
            if dim % divisor:
                raise TrainerConfigError(
                    f"pad_to {self.pad_to} must be divisible by {divisor} at depth {self.depth}"
                )

    @property
    def spatial_divisor(self) -> int:
        """Each dim must divide by this: one halving per block after the first."""
        return 2 ** (self.depth - 1)

    @property
    def widths(self) -> tuple[int, ...]:
        base = max(1, round(64 * self.width_mult))
        return tuple(base * 2**i for i in range(self.depth))


def lr_schedule(step: int, cfg: TrainConfig) -> float:
    """Linear warm-up from 0 to the base rate, then constant."""
    if step < 0:
        raise TrainerConfigError("step must be >= 0")
    if cfg.warmup_steps == 0:
        return cfg.learning_rate
    return cfg.learning_rate * min(step / cfg.warmup_steps, 1.0)


class DoubleConv(nn.Module):
    """(conv 3x3 -> BN -> ReLU) twice."""

    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(cin, cout, kernel_size=3, padding=1, bias=False),
            nn.BatchNorm2d(cout),
            nn.ReLU(inplace=True),
            nn.Conv2d(cout, cout, kernel_size=3, padding=1, bias=False),
            nn.BatchNorm2d(cout),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.block(x)


class UNet(nn.Module):
    def __init__(self, cfg: TrainConfig):
        super().__init__()
        self.cfg = cfg
        widths = cfg.widths
        self.inc = DoubleConv(cfg.in_channels, widths[0])
        self.downs = nn.ModuleList(
            DoubleConv(widths[i - 1], widths[i]) for i in range(1, cfg.depth)
        )
        self.pool = nn.MaxPool2d(2)
        self.ups = nn.ModuleList(
            nn.ConvTranspose2d(widths[i], widths[i - 1], kernel_size=2, stride=2)
            for i in range(cfg.depth - 1, 0, -1)
        )
        self.up_convs = nn.ModuleList(
            DoubleConv(widths[i - 1] * 2, widths[i - 1])
            for i in range(cfg.depth - 1, 0, -1)
        )
        self.outc = nn.Conv2d(widths[0], cfg.out_channels, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        divisor = self.cfg.spatial_divisor
        if h % divisor or w % divisor:
            raise TrainerConfigError(
                f"spatial dims {h}x{w} must be divisible by {divisor} "
                f"at depth {self.cfg.depth}; pad the input first"
            )
        skips = [self.inc(x)]
        for down in self.downs:
            skips.append(down(self.pool(skips[-1])))
        y = skips.pop()
        for up, conv in zip(self.ups, self.up_convs):
            y = up(y)
            y = conv(torch.cat([skips.pop(), y], dim=1))
        return self.outc(y)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def build_model(cfg: TrainConfig, seed: int | None = None) -> UNet:
    """Construct the network with seeded initialization for reproducibility."""
    if seed is not None:
        torch.manual_seed(seed)
    return UNet(cfg)


def pad_for_model(x: torch.Tensor, cfg: TrainConfig) -> tuple[torch.Tensor, tuple[int, int]]:
    """Zero-pad H and W up to the next multiple of the model's divisor.

    Content sits top-left; returns the original (H, W) for crop_back.
    The canonical 495x436 grid pads to 496x448 at depth 5.
    """
    h, w = x.shape[-2:]
    divisor = cfg.spatial_divisor
    target_h = -(-h // divisor) * divisor
    target_w = -(-w // divisor) * divisor
    padded = nn.functional.pad(x, (0, target_w - w, 0, target_h - h))
    return padded, (h, w)


def crop_back(x: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
    h, w = size
    return x[..., :h, :w]
