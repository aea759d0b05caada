"""Minimal invertible ISP: packed RAW to encoded RGB and back.

One RGB pixel per CFA tile (no demosaicing) keeps render/unprocess an exact
algebraic inverse; the only information dropped is the G1/G2 split, which
unprocess restores as G1 = G2. Clipping happens exactly once, at render
entry; unprocess never clips.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValueRangeError
from .profile import CameraProfile
from .raw import PackedRaw

_SRGB_LINEAR_CUT = 0.0031308
_SRGB_ENCODED_CUT = 0.04045


@dataclass(frozen=True)
class RgbImage:
    """Half-resolution RGB planes [3, H/2, W/2] with an encoding flag."""

    planes: np.ndarray
    encoded: bool

    def __post_init__(self):
        planes = np.asarray(self.planes, dtype=np.float32)
        if planes.ndim != 3 or planes.shape[0] != 3:
            raise DimensionError(f"rgb planes must be [3, H/2, W/2], got {planes.shape}")
        planes = np.ascontiguousarray(planes)
        planes.flags.writeable = False
        object.__setattr__(self, "planes", planes)


def srgb_encode(x):
    """Standard sRGB transfer, extended to a bijection on all reals.

    The linear segment continues below 0 and the power law above 1, so the
    inverse is exact even for out-of-gamut intermediates.
    """
    x = np.asarray(x)
    lo = x <= _SRGB_LINEAR_CUT
    out = np.where(
        lo,
        12.92 * x,
        1.055 * np.power(np.maximum(x, _SRGB_LINEAR_CUT), 1.0 / 2.4) - 0.055,
    )
    return out


def srgb_decode(y):
    """Inverse of srgb_encode on all reals."""
    y = np.asarray(y)
    lo = y <= _SRGB_ENCODED_CUT
    out = np.where(
        lo,
        y / 12.92,
        np.power((np.maximum(y, _SRGB_ENCODED_CUT) + 0.055) / 1.055, 2.4),
    )
    return out


def render(packed: PackedRaw, profile: CameraProfile) -> RgbImage:
    """clip [0,1] -> white balance -> RGB assembly (G = mean(G1,G2)) -> ccm -> sRGB."""
    planes = np.clip(packed.planes.astype(np.float64), 0.0, 1.0)
    wb = profile.wb_gains
    r = planes[0] * wb[0]
    g = 0.5 * (planes[1] + planes[2]) * wb[1]
    b = planes[3] * wb[2]
    cam = np.stack([r, g, b])
    srgb_linear = np.einsum("ij,jhw->ihw", profile.ccm, cam)
    return RgbImage(planes=srgb_encode(srgb_linear).astype(np.float32), encoded=True)


def unprocess(rgb: RgbImage, profile: CameraProfile) -> PackedRaw:
    """Exact inverse of render on the half-resolution path; never clips."""
    if not rgb.encoded:
        raise ValueRangeError("unprocess expects an encoded (gamma-compressed) image")
    srgb_linear = srgb_decode(rgb.planes.astype(np.float64))
    inv_ccm = np.linalg.inv(profile.ccm)
    cam = np.einsum("ij,jhw->ihw", inv_ccm, srgb_linear)
    wb = profile.wb_gains
    r = cam[0] / wb[0]
    g = cam[1] / wb[1]
    b = cam[2] / wb[2]
    planes = np.stack([r, g, g, b]).astype(np.float32)
    return PackedRaw(
        planes=planes,
        bayer_pattern="RGGB",
        black_level=(0.0,) * 4,
        white_level=1.0,
        iso=0.0,
        exposure_time=0.0,
    )
