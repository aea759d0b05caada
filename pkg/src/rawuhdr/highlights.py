"""Synthetic overexposed highlights: random ellipse patches with smooth gains.

The amplification is multiplicative on a soft mask, I_L = clean * (1 + M*(g-1)),
which preserves linear-radiance semantics; the mask union is bilateral-smoothed
and Gaussian-feathered so patch boundaries carry no hard edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .raw import PackedRaw


@dataclass(frozen=True)
class HighlightSpec:
    """Sampling ranges for patch count, shape, and gain, plus mask smoothing.

    Sigmas of 0 disable the corresponding smoothing stage (used by tests and
    diagnostic runs); production specs keep them positive.
    """

    n_patches: tuple[int, int]
    patch_radius: tuple[float, float]
    gain: tuple[float, float]
    bilateral_spatial_sigma: float = 8.0
    bilateral_range_sigma: float = 0.1
    feather_sigma: float = 12.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.n_patches
        if not (0 <= lo <= hi):
            raise ValueError(f"n_patches range invalid: {self.n_patches}")
        rlo, rhi = self.patch_radius
        if not (0 < rlo <= rhi):
            raise ValueError(f"patch_radius range invalid: {self.patch_radius}")
        glo, ghi = self.gain
        if not (1.0 <= glo <= ghi):
            raise ValueError(f"gain range must sit at or above 1: {self.gain}")
        for name in ("bilateral_spatial_sigma", "bilateral_range_sigma", "feather_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in u64")


@dataclass(frozen=True)
class Patch:
    cy: float
    cx: float
    ry: float
    rx: float
    theta: float
    gain: float


def sample_patches(shape, spec: HighlightSpec, rng) -> list[Patch]:
    """Draw all patch randomness up front in a fixed order."""
    h, w = shape
    n = int(rng.integers(spec.n_patches[0], spec.n_patches[1] + 1))
    log_lo, log_hi = np.log(spec.gain[0]), np.log(spec.gain[1])
    patches = []
    for _ in range(n):
        cy = float(rng.uniform(0, h))
        cx = float(rng.uniform(0, w))
        ry = float(rng.uniform(*spec.patch_radius))
        rx = float(rng.uniform(*spec.patch_radius))
        theta = float(rng.uniform(0, np.pi))
        gain = float(np.exp(rng.uniform(log_lo, log_hi)))
        patches.append(Patch(cy, cx, ry, rx, theta, gain))
    return patches


def _ellipse_mask(shape, patch: Patch) -> np.ndarray:
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dy = yy - patch.cy
    dx = xx - patch.cx
    c, s = np.cos(patch.theta), np.sin(patch.theta)
    u = (dx * c + dy * s) / patch.rx
    v = (-dx * s + dy * c) / patch.ry
    return (u * u + v * v <= 1.0).astype(np.float64)


def bilateral_filter(plane: np.ndarray, spatial_sigma: float, range_sigma: float) -> np.ndarray:
    """Edge-preserving smoothing; weights = spatial gaussian * range gaussian.

    Window truncated at 3 spatial sigmas, symmetric padding. Constant planes
    are fixed points since all weights cancel.
    """
    plane = np.asarray(plane, dtype=np.float64)
    radius = max(1, int(np.ceil(3 * spatial_sigma)))
    padded = np.pad(plane, radius, mode="symmetric")
    inv_2ss = 1.0 / (2.0 * spatial_sigma**2)
    inv_2rs = 1.0 / (2.0 * range_sigma**2)
    acc = np.zeros_like(plane)
    norm = np.zeros_like(plane)
    h, w = plane.shape
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            w_s = np.exp(-(dy * dy + dx * dx) * inv_2ss)
            shifted = padded[radius + dy : radius + dy + h, radius + dx : radius + dx + w]
            w_r = np.exp(-((shifted - plane) ** 2) * inv_2rs)
            weight = w_s * w_r
            acc += weight * shifted
            norm += weight
    return acc / norm


def _feather_kernel(sigma: float) -> np.ndarray:
    # radius of 5 sigma keeps the normalized peak within 1e-6 of the
    # continuous 1/(sqrt(2pi) sigma) bound the mask-smoothness contract uses
    radius = max(1, int(np.ceil(5 * sigma)))
    u = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(u**2) / (2.0 * sigma**2))
    return k / k.sum()


def gaussian_feather(mask: np.ndarray, sigma: float) -> np.ndarray:
    """Separable normalized Gaussian blur of a [0,1] mask; zero beyond borders."""
    mask = np.asarray(mask, dtype=np.float64)
    k = _feather_kernel(sigma)
    out = convolve1d(mask, k, axis=0, mode="constant", cval=0.0)
    out = convolve1d(out, k, axis=1, mode="constant", cval=0.0)
    return out


def highlight_mask(shape, spec: HighlightSpec, rng) -> tuple[np.ndarray, float]:
    """Smoothed, feathered union mask in [0,1] and the maximum drawn gain.

    Per-patch gains are baked into the union as (gain-1)-weighted fields and
    normalized by (max gain - 1), so multiplying the returned mask by
    (gmax - 1) restores each patch's own amplification.
    """
    h, w = shape
    patches = sample_patches(shape, spec, rng)
    gains = [p.gain for p in patches]
    gmax = max(gains, default=1.0)
    if not patches or gmax <= 1.0:
        return np.zeros((h, w), dtype=np.float64), 1.0
    field = np.zeros((h, w), dtype=np.float64)
    for p in patches:
        np.maximum(field, (p.gain - 1.0) * _ellipse_mask(shape, p), out=field)
    field /= gmax - 1.0
    if spec.bilateral_spatial_sigma > 0 and spec.bilateral_range_sigma > 0:
        field = bilateral_filter(
            field, spec.bilateral_spatial_sigma, spec.bilateral_range_sigma
        )
    if spec.feather_sigma > 0:
        field = gaussian_feather(field, spec.feather_sigma)
    return np.clip(field, 0.0, 1.0), gmax


def apply_highlight_mask(clean: PackedRaw, mask: np.ndarray, gain: float) -> PackedRaw:
    """I_L = clean * (1 + mask*(gain-1)); shared mask across all four planes."""
    amp = 1.0 + np.asarray(mask, dtype=np.float64) * (gain - 1.0)
    planes = (clean.planes.astype(np.float64) * amp[None, :, :]).astype(np.float32)
    return clean.with_planes(planes)


def amplify(clean: PackedRaw, spec: HighlightSpec, rng=None) -> PackedRaw:
    """Inject random highlight patches; returns the lighted image I_L.

    Never darkens; output values may exceed 1 (clipping stays explicit and
    happens downstream). Identical (clean, spec, seed) give bit-identical
    output.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    mask, gmax = highlight_mask(clean.plane_shape, spec, rng)
    if gmax <= 1.0 or not np.any(mask):
        return clean
    return apply_highlight_mask(clean, mask, gmax)
