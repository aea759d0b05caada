"""Evaluation metrics and the exposure-aligned comparison protocol.

Predictions are aligned to the reference with a single least-squares
exposure scale before anything is measured, then both sides are rendered
through the same ISP; PSNR and SSIM are taken on the rendered RGB while
the L1 family is taken on the aligned RAW planes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import DimensionError, ValueRangeError
from .fusion import RatioMap
from .isp import render
from .profile import CameraProfile
from .raw import PackedRaw

DEFAULT_EPSILON = 1e-2

REPORT_FIELDS = ("psnr", "ssim", "weighted_l1", "relative_l1", "l1", "align_scale")


@dataclass(frozen=True)
class MetricReport:
    """One evaluated pair.

    `weighted_l1` uses the stabilized denominator (eps 1e-2); `relative_l1`
    is the same form at eps 0, reported as NaN when the reference holds
    exact zeros and the relative error is undefined.
    """

    psnr: float
    ssim: float
    weighted_l1: float
    relative_l1: float
    l1: float
    align_scale: float

    def __post_init__(self):
        if self.ssim > 1.0 + 1e-9:
            raise ValueRangeError(f"ssim cannot exceed 1, got {self.ssim}")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in REPORT_FIELDS}


def _as_plane_array(x) -> np.ndarray:
    if isinstance(x, RatioMap):
        return x.values
    return np.asarray(x, dtype=np.float64)


def _check_shapes(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")


def weighted_l1(s, s_tilde, eps: float = DEFAULT_EPSILON) -> float:
    """Mean |s - s_tilde| / (s + eps); at eps 0 this is mean relative error."""
    s = _as_plane_array(s)
    s_tilde = _as_plane_array(s_tilde)
    _check_shapes(s, s_tilde)
    den = s + eps
    if not np.all(den > 0):
        raise ValueRangeError("weighted L1 denominator must be strictly positive")
    return float(np.mean(np.abs(s - s_tilde) / den))


def l1(a, b) -> float:
    """Mean absolute difference."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    return float(np.mean(np.abs(a - b)))


def psnr(a, b, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); identical inputs report infinity."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(window: int, sigma: float) -> np.ndarray:
    offsets = np.arange(window) - (window - 1) / 2.0
    g = np.exp(-(offsets * offsets) / (2.0 * sigma * sigma))
    g = g / g.sum()
    return np.outer(g, g)


def _ssim_plane(a, b, win, c1, c2) -> float:
    mu_a = convolve2d(a, win, mode="valid")
    mu_b = convolve2d(b, win, mode="valid")
    var_a = convolve2d(a * a, win, mode="valid") - mu_a * mu_a
    var_b = convolve2d(b * b, win, mode="valid") - mu_b * mu_b
    cov = convolve2d(a * b, win, mode="valid") - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def ssim(
    a,
    b,
    window: int = 11,
    window_sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
    peak: float = 1.0,
) -> float:
    """Mean local SSIM under a Gaussian window, valid region only.

    Multi-channel inputs [C, h, w] score each plane separately and return
    the plain average.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    if a.ndim == 3:
        return float(
            np.mean(
                [
                    ssim(a[c], b[c], window, window_sigma, k1, k2, peak)
                    for c in range(a.shape[0])
                ]
            )
        )
    if a.ndim != 2:
        raise DimensionError(f"ssim expects 2-d or [C, h, w] input, got {a.shape}")
    if min(a.shape) < window:
        raise DimensionError(
            f"image {a.shape} is smaller than the {window}x{window} window"
        )
    win = _gaussian_window(window, window_sigma)
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    return _ssim_plane(a, b, win, c1, c2)


def exposure_align(pred, ref, per_channel: bool = False):
    """Least-squares exposure match: returns (scale * pred, scale).

    The global scale is <pred, ref> / <pred, pred>. With per_channel the
    same closed form runs independently per leading-axis channel and the
    scale comes back shaped for broadcasting.
    """
    p = np.asarray(pred, dtype=np.float64)
    r = np.asarray(ref, dtype=np.float64)
    _check_shapes(p, r)
    if per_channel:
        axes = tuple(range(1, p.ndim))
        num = np.sum(p * r, axis=axes)
        den = np.sum(p * p, axis=axes)
        if np.any(den == 0.0):
            raise ValueRangeError("a prediction channel is identically zero")
        scale = (num / den).reshape((-1,) + (1,) * (p.ndim - 1))
        return p * scale, scale
    den = float(np.sum(p * p))
    if den == 0.0:
        raise ValueRangeError("prediction is identically zero")
    scale = float(np.sum(p * r)) / den
    return p * scale, scale


def evaluate_pair(pred: PackedRaw, ref: PackedRaw, profile: CameraProfile) -> MetricReport:
    """Full comparison protocol for one prediction against its reference."""
    if pred.planes.shape != ref.planes.shape:
        raise DimensionError(
            f"shape mismatch {pred.planes.shape} vs {ref.planes.shape}"
        )
    aligned, scale = exposure_align(pred.planes, ref.planes)
    ref64 = ref.planes.astype(np.float64)

    rgb_pred = render(pred.with_planes(aligned.astype(np.float32)), profile)
    rgb_ref = render(ref, profile)

    if np.all(ref64 > 0):
        relative = weighted_l1(ref64, aligned, eps=0.0)
    else:
        relative = math.nan
    return MetricReport(
        psnr=psnr(rgb_pred.planes, rgb_ref.planes),
        ssim=ssim(rgb_pred.planes, rgb_ref.planes),
        weighted_l1=weighted_l1(ref64, aligned, eps=DEFAULT_EPSILON),
        relative_l1=relative,
        l1=l1(ref64, aligned),
        align_scale=scale,
    )
