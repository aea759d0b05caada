"""Per-pixel amplification ratios and the grid encodings derived from them.

The denoiser is conditioned on how much each pixel was amplified relative
to the fused reference. That residual ratio r = R / S is mapped onto a
fixed grid of D values and expanded into a D-channel tensor, by default
with a scaled Gaussian profile

    channel j = exp(-(r - y[j])^2 / (2 sigma^2)) / (sqrt(2 pi) sigma r)

whose peak height falls off as 1/r, so brighter (less amplified) pixels
carry a proportionally weaker conditioning signal. One-hot and sinusoidal
positional encodings are provided behind the same interface for ablation.

Ratios are computed per CFA tile: the four-channel ratio map is collapsed
by arithmetic mean, giving one r per tile at the half resolution of the
packed planes. Ratios outside the grid range saturate to the nearest
endpoint; that keeps every encoded entry within its documented bound.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    FormatError,
    TruncatedPayloadError,
    ValueRangeError,
    VersionError,
)
from .fusion import RatioMap

SQRT_2PI = float(np.sqrt(2.0 * np.pi))

DEFAULT_SIGMA = 30.0
DEFAULT_DIMS = 64
DEFAULT_RANGE = (1.0, 320.0)

UENC_MAGIC = b"UENC"
UENC_VERSION = 1

# magic, version, encoder code, reserved, D, height, width,
# sigma, r_lo, r_hi, payload byte count
_UENC_HEADER = struct.Struct("<4sHBBHIIfffQ")
UENC_HEADER_SIZE = _UENC_HEADER.size

ENCODER_CODES = {"gaussian": 0, "one-hot": 1, "positional": 2}
ENCODER_FROM_CODE = {v: k for k, v in ENCODER_CODES.items()}


@dataclass(frozen=True)
class EncodingSpec:
    """Grid geometry and bandwidth shared by all encoders.

    The defaults (64 points over [1, 320], sigma 30) cover amplification
    ratios up to 300 with the unit lower end reached when a pixel was
    amplified exactly as much as the reference requires.
    """

    sigma: float = DEFAULT_SIGMA
    dims: int = DEFAULT_DIMS
    r_lo: float = DEFAULT_RANGE[0]
    r_hi: float = DEFAULT_RANGE[1]

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.r_lo < 1.0:
            raise ValueError(f"ratio grid must start at 1 or above, got {self.r_lo}")
        if not self.r_lo < self.r_hi:
            raise ValueError(
                f"ratio range must be increasing, got [{self.r_lo}, {self.r_hi}]"
            )
        if self.dims < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.dims}")

    @property
    def grid(self) -> np.ndarray:
        """D uniformly spaced grid values, endpoints exact."""
        return np.linspace(self.r_lo, self.r_hi, self.dims)


def upper_bound(spec: EncodingSpec) -> float:
    """Largest value a Gaussian-encoded entry can take: the peak at r_lo."""
    return 1.0 / (SQRT_2PI * spec.sigma * spec.r_lo)


@dataclass(frozen=True)
class EncodedRatio:
    """Validated Gaussian encoding: [D, h, w], entries in (0, peak(r_lo)]."""

    tensor: np.ndarray
    spec: EncodingSpec

    def __post_init__(self):
        t = self.tensor
        if t.ndim != 3 or t.shape[0] != self.spec.dims:
            raise ValueRangeError(
                f"encoded tensor must be [D, h, w] with D={self.spec.dims}, "
                f"got shape {t.shape}"
            )
        if not np.all(np.isfinite(t)):
            raise ValueRangeError("encoded tensor holds non-finite entries")
        if not np.all(t > 0):
            raise ValueRangeError("encoded tensor holds non-positive entries")
        if not np.all(t <= upper_bound(self.spec)):
            raise ValueRangeError("encoded tensor exceeds the peak bound")


def _checked_ratio_plane(r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 2:
        raise ValueRangeError(f"ratio plane must be 2-d, got shape {r.shape}")
    if not np.all(np.isfinite(r)) or not np.all(r > 0):
        raise ValueRangeError("ratios must be finite and strictly positive")
    return r


def pixel_ratio(ratio: RatioMap, amplification: float) -> np.ndarray:
    """Residual ratio r = R / S per CFA tile, using the channel-mean S.

    `amplification` is the ratio R the noisy frame will be multiplied by;
    it must be at least 1.
    """
    if not amplification >= 1.0:
        raise ValueRangeError(f"amplification must be >= 1, got {amplification}")
    mean = ratio.channel_mean()
    if not np.all(mean > 0):
        raise ValueRangeError("ratio map mean must be strictly positive")
    return amplification / mean


def gaussian_encoding(r, spec: EncodingSpec) -> np.ndarray:
    """Scaled Gaussian profile over the grid, float64 [D, h, w]."""
    r = _checked_ratio_plane(r)
    rc = np.clip(r, spec.r_lo, spec.r_hi)
    diff = rc[None, :, :] - spec.grid[:, None, None]
    gauss = np.exp(-(diff * diff) / (2.0 * spec.sigma * spec.sigma))
    return gauss / (SQRT_2PI * spec.sigma * rc)[None, :, :]


def one_hot_encoding(r, spec: EncodingSpec) -> np.ndarray:
    """1 at the grid point nearest r, 0 elsewhere; float64 [D, h, w]."""
    r = _checked_ratio_plane(r)
    rc = np.clip(r, spec.r_lo, spec.r_hi)
    nearest = np.argmin(np.abs(rc[None, :, :] - spec.grid[:, None, None]), axis=0)
    channels = np.arange(spec.dims)[:, None, None]
    return (channels == nearest[None, :, :]).astype(np.float64)


def positional_encoding(r, spec: EncodingSpec) -> np.ndarray:
    """Sinusoidal features of the normalized ratio; float64 [D, h, w].

    The ratio is rescaled to t in [0, 1] over the grid range, then pairs
    of channels hold sin and cos at octave-spaced frequencies.
    """
    r = _checked_ratio_plane(r)
    rc = np.clip(r, spec.r_lo, spec.r_hi)
    t = (rc - spec.r_lo) / (spec.r_hi - spec.r_lo)
    out = np.empty((spec.dims,) + r.shape, dtype=np.float64)
    pairs = spec.dims // 2
    for k in range(pairs):
        phase = (2.0**k) * np.pi * t
        out[2 * k] = np.sin(phase)
        out[2 * k + 1] = np.cos(phase)
    if spec.dims % 2:
        out[-1] = np.sin((2.0**pairs) * np.pi * t)
    return out


ENCODERS = {
    "gaussian": gaussian_encoding,
    "one-hot": one_hot_encoding,
    "positional": positional_encoding,
}


def encode(r, spec: EncodingSpec) -> EncodedRatio:
    """Gaussian-encode a ratio plane and validate the result."""
    return EncodedRatio(tensor=gaussian_encoding(r, spec), spec=spec)


def write_uenc(path, tensor: np.ndarray, spec: EncodingSpec, kind: str = "gaussian"):
    """Serialize an encoded tensor as float32 with its grid in the header."""
    if kind not in ENCODER_CODES:
        raise FormatError(f"unknown encoder kind {kind!r}")
    tensor = np.ascontiguousarray(np.asarray(tensor), dtype="<f4")
    if tensor.ndim != 3 or tensor.shape[0] != spec.dims:
        raise FormatError(
            f"tensor must be [D, h, w] with D={spec.dims}, got shape {tensor.shape}"
        )
    payload = tensor.tobytes()
    header = _UENC_HEADER.pack(
        UENC_MAGIC,
        UENC_VERSION,
        ENCODER_CODES[kind],
        0,
        spec.dims,
        tensor.shape[1],
        tensor.shape[2],
        spec.sigma,
        spec.r_lo,
        spec.r_hi,
        len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_uenc(path) -> tuple[np.ndarray, EncodingSpec, str]:
    """Parse a UENC file into (float32 tensor, spec, encoder kind).

    Header scalars are stored at float32 precision, so only specs whose
    sigma and range survive that round trip compare equal after a cycle.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < UENC_HEADER_SIZE:
        if blob[:4] != UENC_MAGIC:
            raise FormatError(f"{path}: not a UENC file")
        raise TruncatedPayloadError(f"{path}: header truncated")
    (
        magic,
        version,
        code,
        _reserved,
        dims,
        height,
        width,
        sigma,
        r_lo,
        r_hi,
        payload_len,
    ) = _UENC_HEADER.unpack_from(blob)
    if magic != UENC_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != UENC_VERSION:
        raise VersionError(f"{path}: unsupported version {version}")
    if code not in ENCODER_FROM_CODE:
        raise FormatError(f"{path}: unknown encoder code {code}")
    expect = dims * height * width * 4
    if payload_len != expect:
        raise FormatError(
            f"{path}: payload must be {expect} bytes, header says {payload_len}"
        )
    payload = blob[UENC_HEADER_SIZE : UENC_HEADER_SIZE + payload_len]
    if len(payload) < payload_len:
        raise TruncatedPayloadError(
            f"{path}: payload holds {len(payload)} of {payload_len} declared bytes"
        )
    try:
        spec = EncodingSpec(
            sigma=float(sigma), dims=dims, r_lo=float(r_lo), r_hi=float(r_hi)
        )
    except ValueError as exc:
        raise FormatError(f"{path}: invalid encoding header: {exc}") from exc
    tensor = np.frombuffer(payload, dtype="<f4").reshape(dims, height, width)
    return tensor, spec, ENCODER_FROM_CODE[code]
