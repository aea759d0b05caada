"""Toy-scale trainer for two-stage RAW UHDR reconstruction.

Consumes datasets produced by the ``rawuhdr`` toolkit (manifest plus
packed RAW containers) and trains two small U-Nets on CPU: a ratio
estimator that predicts the brightening map of an amplified exposure,
and a denoiser that restores the ratio-corrected image with the
amplification level injected as a Gaussian-grid encoding.
"""

from uhdrtrainer.data import EncodingSpec, TileDataset, load_dataset
from uhdrtrainer.infer import infer
from uhdrtrainer.train import (
    EmptyDatasetError,
    TrainingDiverged,
    TrainResult,
    load_checkpoint,
    train_denoiser,
    train_ratio_estimator,
)
from uhdrtrainer.unet import UNet, UNetConfig
from uhdrtrainer.uraw import PackedTile, read_packed, write_packed

__all__ = [
    "EncodingSpec",
    "TileDataset",
    "load_dataset",
    "infer",
    "EmptyDatasetError",
    "TrainingDiverged",
    "TrainResult",
    "load_checkpoint",
    "train_denoiser",
    "train_ratio_estimator",
    "UNet",
    "UNetConfig",
    "PackedTile",
    "read_packed",
    "write_packed",
]
