"""Single-image reconstruction with trained weights.

Given a dark packed RAW tile and a user-chosen amplification, runs the
full pipeline: brighten by the requested factor, estimate the
brightening map the scene actually needs, correct the exposure, encode
the leftover per-pixel amplification, and denoise.
"""

from __future__ import annotations

import numpy as np
import torch

from uhdrtrainer.data import EncodingSpec
from uhdrtrainer.encoding import gaussian_encoding, pixel_ratio
from uhdrtrainer.train import RATIO_FLOOR
from uhdrtrainer.unet import UNet
from uhdrtrainer.uraw import PackedTile


def infer(
    tile: PackedTile,
    amplification: float,
    estimator: UNet,
    denoiser: UNet,
    encoding: EncodingSpec,
) -> PackedTile:
    """Reconstruct a clean well-exposed tile from a dark noisy one.

    amplification is the total brightening the user asks for; encoding
    must match the spec the denoiser was trained with. Returns a tile
    with the same metadata and shape. Raises ValueError on non-positive
    amplification or when the networks produce non-finite output, which
    points at untrained or diverged weights.
    """
    if amplification <= 0:
        raise ValueError(f"amplification must be positive, got {amplification}")
    estimator.eval()
    denoiser.eval()
    with torch.no_grad():
        x = torch.from_numpy(np.ascontiguousarray(tile.planes)).unsqueeze(0)
        x = x * amplification
        s_hat = estimator(x).clamp_min(RATIO_FLOOR)
        corrected = x / s_hat
        r = pixel_ratio(
            torch.tensor([amplification], dtype=x.dtype), s_hat
        )
        enc = gaussian_encoding(r, encoding)
        out = denoiser(corrected, enc)[0]
    planes = out.numpy().astype(np.float32)
    if not np.isfinite(planes).all():
        raise ValueError(
            "inference produced non-finite values; weights look untrained or diverged"
        )
    return PackedTile(
        planes=planes,
        bayer_pattern=tile.bayer_pattern,
        black_level=tile.black_level,
        white_level=tile.white_level,
        iso=tile.iso,
        exposure_time=tile.exposure_time,
    )
