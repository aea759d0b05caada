"""Pseudo exposure stacks, Mertens-style fusion, and the clean ratio map.

The stack simulates overexposure truncation: frame i = clip(I_L / 2^i, 0, 1).
Fusion runs in encoded RGB (the fusion method's native domain), combines
frames with contrast/saturation/well-exposedness weights through a
Laplacian-pyramid blend, and returns to RAW through the exact inverse ISP.
The ratio map S = I_L / (I_LF + eps) then captures, per pixel, how much the
fused reference was attenuated relative to the lighted image.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .errors import DimensionError, ValueRangeError
from .isp import RgbImage, render, unprocess
from .profile import CameraProfile
from .raw import PackedRaw

log = logging.getLogger(__name__)

EPSILON_WEIGHT = 1e-12
EPSILON_RATIO = 1e-6
WELL_EXPOSED_SIGMA = 0.2
DEFAULT_STOPS = 9
DEFAULT_EXPONENTS = (1.0, 1.0, 1.0)

# keeps the ratio map strictly positive where I_L is exactly zero; perturbs
# the reconstruction identity by at most this much
_RATIO_FLOOR = 1e-12

_PYRAMID_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass(frozen=True)
class ExposureStack:
    frames: tuple[PackedRaw, ...]
    n_stops: int


@dataclass(frozen=True)
class RatioMap:
    """Per-channel ratio planes [4, H/2, W/2], float64, strictly positive."""

    values: np.ndarray
    epsilon: float

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if values.ndim != 3 or values.shape[0] != 4:
            raise DimensionError(f"ratio map must be [4, H/2, W/2], got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueRangeError("ratio map must be finite everywhere")
        if values.min() <= 0:
            raise ValueRangeError("ratio map must be strictly positive")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def channel_mean(self) -> np.ndarray:
        """One shared ratio per CFA tile: arithmetic mean over the 4 planes."""
        return self.values.mean(axis=0)


def make_exposure_stack(lighted: PackedRaw, n_stops: int) -> ExposureStack:
    """Frame i = clip(lighted / 2^i, 0, 1) for i = 0..n_stops-1."""
    if n_stops < 1:
        raise ValueRangeError(f"n_stops must be >= 1, got {n_stops}")
    if lighted.planes.min() < 0:
        raise ValueRangeError("exposure stack input must be non-negative")
    frames = tuple(
        lighted.with_planes(np.clip(lighted.planes / np.float32(2.0**i), 0.0, 1.0))
        for i in range(n_stops)
    )
    return ExposureStack(frames=frames, n_stops=n_stops)


def contrast(rgb_planes: np.ndarray) -> np.ndarray:
    """|discrete Laplacian| of the channel-mean luma, symmetric borders."""
    luma = rgb_planes.astype(np.float64).mean(axis=0)
    padded = np.pad(luma, 1, mode="symmetric")
    lap = (
        padded[:-2, 1:-1]
        + padded[2:, 1:-1]
        + padded[1:-1, :-2]
        + padded[1:-1, 2:]
        - 4.0 * padded[1:-1, 1:-1]
    )
    return np.abs(lap)


def saturation(rgb_planes: np.ndarray) -> np.ndarray:
    """Per-pixel standard deviation across (R, G, B)."""
    return rgb_planes.astype(np.float64).std(axis=0)


def well_exposedness(rgb_planes: np.ndarray) -> np.ndarray:
    """Product over channels of a Gaussian centered at 0.5 (sigma 0.2)."""
    p = rgb_planes.astype(np.float64)
    return np.prod(
        np.exp(-((p - 0.5) ** 2) / (2.0 * WELL_EXPOSED_SIGMA**2)), axis=0
    )


def fusion_weights(frame_rgb: RgbImage, exponents=DEFAULT_EXPONENTS) -> np.ndarray:
    """W = contrast^wc * saturation^ws * well_exposedness^we + eps_w (0^0 = 1)."""
    wc, ws, we = exponents
    w = (
        np.power(contrast(frame_rgb.planes), wc)
        * np.power(saturation(frame_rgb.planes), ws)
        * np.power(well_exposedness(frame_rgb.planes), we)
    )
    return w + EPSILON_WEIGHT


def normalize_weights(weights: list[np.ndarray]) -> list[np.ndarray]:
    """Divide by the per-pixel sum; eps_w in each weight guards against 0/0."""
    total = np.sum(weights, axis=0)
    return [w / total for w in weights]


def default_levels(h: int, w: int) -> int:
    """floor(log2(min(H,W)/2)) capped at 7, at least 1."""
    depth = int(np.floor(np.log2(max(min(h, w), 2) / 2.0)))
    return max(1, min(7, depth))


def _blur(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = convolve1d(x, kernel, axis=-2, mode="reflect")
    return convolve1d(out, kernel, axis=-1, mode="reflect")


def _reduce(x: np.ndarray) -> np.ndarray:
    return _blur(x, _PYRAMID_KERNEL)[..., ::2, ::2]


def _expand(x: np.ndarray, target_hw: tuple[int, int]) -> np.ndarray:
    h, w = target_hw
    up = np.zeros(x.shape[:-2] + (h, w), dtype=x.dtype)
    up[..., ::2, ::2] = x
    return _blur(up, 2.0 * _PYRAMID_KERNEL)


def _gaussian_pyramid(x: np.ndarray, levels: int) -> list[np.ndarray]:
    pyr = [x]
    for _ in range(levels - 1):
        pyr.append(_reduce(pyr[-1]))
    return pyr


def _laplacian_pyramid(x: np.ndarray, levels: int) -> list[np.ndarray]:
    gauss = _gaussian_pyramid(x, levels)
    pyr = []
    for lvl in range(levels - 1):
        hw = gauss[lvl].shape[-2:]
        pyr.append(gauss[lvl] - _expand(gauss[lvl + 1], hw))
    pyr.append(gauss[-1])
    return pyr


def _collapse(pyr: list[np.ndarray]) -> np.ndarray:
    acc = pyr[-1]
    for lvl in range(len(pyr) - 2, -1, -1):
        acc = pyr[lvl] + _expand(acc, pyr[lvl].shape[-2:])
    return acc


def pyramid_fuse(frames_rgb: list[RgbImage], weights: list[np.ndarray], levels: int) -> RgbImage:
    """Blend Laplacian pyramids of the frames under Gaussian pyramids of the weights.

    Weights must already be normalized per pixel. levels=1 degenerates into
    the per-pixel weighted mean. Output is clipped to [0,1] and stays encoded.
    """
    if len(frames_rgb) != len(weights) or not frames_rgb:
        raise DimensionError("need one weight plane per frame")
    shape = frames_rgb[0].planes.shape
    for f, w in zip(frames_rgb, weights):
        if f.planes.shape != shape or w.shape != shape[-2:]:
            raise DimensionError("all frames and weights must share one shape")
    if levels < 1:
        raise ValueRangeError(f"levels must be >= 1, got {levels}")
    if levels == 1:
        fused = np.zeros(shape, dtype=np.float64)
        for f, w in zip(frames_rgb, weights):
            fused += f.planes.astype(np.float64) * w[None]
    else:
        fused_pyr = None
        for f, w in zip(frames_rgb, weights):
            lap = _laplacian_pyramid(f.planes.astype(np.float64), levels)
            gw = _gaussian_pyramid(np.asarray(w, dtype=np.float64), levels)
            terms = [l * g[None] for l, g in zip(lap, gw)]
            if fused_pyr is None:
                fused_pyr = terms
            else:
                fused_pyr = [a + b for a, b in zip(fused_pyr, terms)]
        fused = _collapse(fused_pyr)
    return RgbImage(planes=np.clip(fused, 0.0, 1.0).astype(np.float32), encoded=True)


def fuse_to_raw(
    lighted: PackedRaw,
    profile: CameraProfile,
    n_stops: int = DEFAULT_STOPS,
    exponents=DEFAULT_EXPONENTS,
    levels: int | None = None,
) -> PackedRaw:
    """Full fusion path: stack -> render -> weights -> pyramid -> unprocess.

    Returns the fused reference I_LF in [0,1] with the source's metadata.
    """
    stack = make_exposure_stack(lighted, n_stops)
    rgbs = [render(f, profile) for f in stack.frames]
    weights = normalize_weights([fusion_weights(r, exponents) for r in rgbs])
    if levels is None:
        levels = default_levels(*lighted.plane_shape)
    fused = pyramid_fuse(rgbs, weights, levels)
    raw = unprocess(fused, profile)
    return lighted.with_planes(np.clip(raw.planes, 0.0, 1.0))


def ratio_map(lighted: PackedRaw, fused: PackedRaw, eps: float = EPSILON_RATIO) -> RatioMap:
    """S = lighted / (fused + eps), per channel, floored at a tiny positive value.

    The reconstruction identity S * (fused + eps) == lighted holds to float
    rounding (the positivity floor only matters where lighted is exactly 0).
    """
    if lighted.planes.shape != fused.planes.shape:
        raise DimensionError(
            f"shape mismatch {lighted.planes.shape} vs {fused.planes.shape}"
        )
    if fused.planes.min() < 0:
        raise ValueRangeError("fused reference must be non-negative")
    num = lighted.planes.astype(np.float64)
    den = fused.planes.astype(np.float64) + eps
    values = np.maximum(num / den, _RATIO_FLOOR)
    low = np.count_nonzero((values < 1.0 - 1e-6) & (fused.planes <= lighted.planes))
    if low:
        log.debug("ratio map has %d sub-unit values where fused <= lighted", low)
    return RatioMap(values=values, epsilon=eps)
