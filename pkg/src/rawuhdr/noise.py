"""Noise synthesis for darkened exposures.

The forward model: divide the lighted image by an attenuation ratio R (the
"missing light"), apply Poisson shot noise under system gain K, add the
signal-independent components (Gaussian read, per-row banding, quantization),
then rescale by R back to the original range:

    out = (Poisson(x / (R*K)) * K + N_read + N_row + N_quant) * R

Expectation is x; variance is R*K*x + R^2*(read^2 + row^2 + quant^2/12).
Negative values survive; clipping would destroy the statistics a denoiser
has to learn. Exposure correction (division by a ratio map) is what turns
the amplified noisy image back into a normally-exposed one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValueRangeError
from .fusion import RatioMap
from .profile import CameraProfile
from .raw import PackedRaw

DEFAULT_RATIO_BOUNDS = (50.0, 300.0)


@dataclass(frozen=True)
class NoiseSample:
    """One draw of the per-sample noise parameters.

    K = 0 is the documented noiseless limit (shot component degenerates to
    x/R exactly); sampled parameters always have K > 0.
    """

    K: float
    R: float
    read_sigma: float
    row_sigma: float
    quant_step: float
    seed: int

    def __post_init__(self):
        if self.K < 0:
            raise ValueRangeError(f"K must be >= 0, got {self.K}")
        if self.R < 1:
            raise ValueRangeError(f"R must be >= 1, got {self.R}")
        for name in ("read_sigma", "row_sigma", "quant_step"):
            if getattr(self, name) < 0:
                raise ValueRangeError(f"{name} must be >= 0")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueRangeError("seed must fit in u64")

    @property
    def noiseless(self) -> bool:
        return (
            self.K == 0.0
            and self.read_sigma == 0.0
            and self.row_sigma == 0.0
            and self.quant_step == 0.0
        )


def sample_ratio(r_min: float, r_max: float, rng) -> float:
    """Log-uniform attenuation ratio in [r_min, r_max]."""
    if not (1.0 <= r_min <= r_max):
        raise ValueRangeError(f"need 1 <= r_min <= r_max, got [{r_min}, {r_max}]")
    if r_min == r_max:
        return float(r_min)
    return float(np.exp(rng.uniform(np.log(r_min), np.log(r_max))))


def sample_noise_params(
    profile: CameraProfile,
    rng,
    ratio_bounds: tuple[float, float] = DEFAULT_RATIO_BOUNDS,
    family: str = "full",
) -> NoiseSample:
    """Draw (K, read_sigma, row_sigma, R, seed) from the profile's calibration.

    log K is uniform in [log_k_min, log_k_max]; log read_sigma follows the
    log-linear fit with Gaussian scatter clipped to +/-3 sigma so every draw
    stays consistent with the profile. family="pg" keeps only shot + Gaussian
    read noise (row and quantization zeroed).
    """
    if family not in ("full", "pg"):
        raise ValueRangeError(f"unknown noise family {family!r}")
    np_ = profile.noise
    log_k = rng.uniform(np_.log_k_min, np_.log_k_max)
    scatter = rng.normal(0.0, np_.read_scatter) if np_.read_scatter > 0 else 0.0
    scatter = float(np.clip(scatter, -3.0 * np_.read_scatter, 3.0 * np_.read_scatter))
    log_sigma = np_.read_slope * log_k + np_.read_intercept + scatter
    read_sigma = float(np.exp(log_sigma))
    row_sigma = np_.row_sigma_ratio * read_sigma
    ratio = sample_ratio(ratio_bounds[0], ratio_bounds[1], rng)
    seed = int(rng.integers(0, 2**64, dtype=np.uint64))
    if family == "pg":
        row_sigma = 0.0
        quant = 0.0
    else:
        quant = np_.quant_step
    return NoiseSample(
        K=float(np.exp(log_k)),
        R=ratio,
        read_sigma=read_sigma,
        row_sigma=row_sigma,
        quant_step=quant,
        seed=seed,
    )


def shot_noise(x: np.ndarray, K: float, R: float, rng) -> np.ndarray:
    """Poisson(x / (R*K)) * K; K = 0 degenerates to the exact mean x/R."""
    x = np.asarray(x, dtype=np.float64)
    if x.min() < 0:
        raise ValueRangeError("shot noise input must be non-negative")
    if K == 0.0:
        return x / R
    lam = x / (R * K)
    return rng.poisson(lam).astype(np.float64) * K


def signal_independent_noise(shape, sample: NoiseSample, rng) -> np.ndarray:
    """Read + per-row + quantization noise on a [4, h, w] plane stack.

    Draw order is fixed (read, row, quant) so seeded runs reproduce exactly.
    """
    c, h, w = shape
    read = (
        rng.normal(0.0, sample.read_sigma, size=shape)
        if sample.read_sigma > 0
        else np.zeros(shape)
    )
    row = (
        rng.normal(0.0, sample.row_sigma, size=(c, h, 1))
        if sample.row_sigma > 0
        else np.zeros((c, h, 1))
    )
    quant = (
        rng.uniform(-0.5 * sample.quant_step, 0.5 * sample.quant_step, size=shape)
        if sample.quant_step > 0
        else np.zeros(shape)
    )
    return read + row + quant


def synthesize_noisy(lighted: PackedRaw, sample: NoiseSample, rng=None) -> PackedRaw:
    """Full noise model: out = (shot(lighted) + N_in) * R, expectation = input.

    A fully noiseless sample passes the planes through bit-exactly.
    """
    if rng is None:
        rng = np.random.default_rng(sample.seed)
    if sample.noiseless:
        return lighted
    shot = shot_noise(lighted.planes, sample.K, sample.R, rng)
    n_in = signal_independent_noise(lighted.planes.shape, sample, rng)
    out = ((shot + n_in) * sample.R).astype(np.float32)
    return lighted.with_planes(out)


def apply_ratio_correction(noisy: PackedRaw, ratio: RatioMap) -> PackedRaw:
    """Exposure correction: divide the amplified noisy image by the ratio map."""
    if ratio.values.shape != noisy.planes.shape:
        raise ValueRangeError(
            f"ratio map shape {ratio.values.shape} does not match planes {noisy.planes.shape}"
        )
    if ratio.values.min() <= 0:
        raise ValueRangeError("ratio map must be strictly positive")
    out = (noisy.planes.astype(np.float64) / ratio.values).astype(np.float32)
    return noisy.with_planes(out)
