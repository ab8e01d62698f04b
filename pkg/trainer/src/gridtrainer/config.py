"""Config files use the same diff-friendly text format as the pipeline
manifests: a `[trainer]` section of `key = value` lines.

    [trainer]
    learning_rate = 0.0003
    batch_size = 8
    warmup_steps = 1000
    depth = 5
    width_mult = 1.0
    pad_to = 496 448
    precision = full
    steps = 1000
    seed = 0
"""

from __future__ import annotations

from pathlib import Path

from .unet import TrainConfig, TrainerConfigError

_INT_KEYS = ("batch_size", "warmup_steps", "depth", "in_channels", "out_channels", "steps", "seed")
_FLOAT_KEYS = ("learning_rate", "width_mult")
_STR_KEYS = ("precision", "encoder")


def parse_config(text: str) -> TrainConfig:
    values: dict = {}
    in_section = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            header = line[1:-1].strip()
            if header != "trainer":
                raise TrainerConfigError(f"line {lineno}: unknown section [{header}]")
            in_section = True
            continue
        if not in_section:
            raise TrainerConfigError(f"line {lineno}: key outside the [trainer] section")
        if "=" not in line:
            raise TrainerConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise TrainerConfigError(f"line {lineno}: duplicate key {key!r}")
        if key in _INT_KEYS:
            values[key] = int(value)
        elif key in _FLOAT_KEYS:
            values[key] = float(value)
        elif key in _STR_KEYS:
            values[key] = value
        elif key == "pad_to":
            parts = value.split()
            if len(parts) != 2:
                raise TrainerConfigError(f"line {lineno}: pad_to needs two integers")
            values[key] = (int(parts[0]), int(parts[1]))
        else:
            raise TrainerConfigError(f"line {lineno}: unknown key {key!r}")
    return TrainConfig(**values)


def serialize_config(cfg: TrainConfig) -> str:
    lines = [
        "[trainer]",
        f"learning_rate = {cfg.learning_rate!r}",
        f"batch_size = {cfg.batch_size}",
        f"warmup_steps = {cfg.warmup_steps}",
        f"depth = {cfg.depth}",
        f"width_mult = {cfg.width_mult!r}",
        f"pad_to = {cfg.pad_to[0]} {cfg.pad_to[1]}",
        f"precision = {cfg.precision}",
        f"encoder = {cfg.encoder}",
        f"in_channels = {cfg.in_channels}",
        f"out_channels = {cfg.out_channels}",
        f"steps = {cfg.steps}",
        f"seed = {cfg.seed}",
    ]
    return "\n".join(lines) + "\n"


def load_config(path) -> TrainConfig:
    return parse_config(Path(path).read_text())
