"""Reference U-Net trainer speaking the T4GR format and the
prediction-file protocol."""

from .train import DivergenceError, evaluate, load_checkpoint, save_checkpoint, train
from .unet import (
    TrainConfig,
    TrainerConfigError,
    UNet,
    build_model,
    crop_back,
    lr_schedule,
    pad_for_model,
)

__version__ = "0.1.0"

__all__ = [
    "DivergenceError",
    "TrainConfig",
    "TrainerConfigError",
    "UNet",
    "build_model",
    "crop_back",
    "evaluate",
    "load_checkpoint",
    "lr_schedule",
    "pad_for_model",
    "save_checkpoint",
    "train",
    "__version__",
]
