"""Gaussian amplification encoding, torch edition.

Mirrors the synthesis toolkit's encoder: a per-pixel effective
amplification r is expanded over an even grid of Gaussian bumps whose
amplitudes scale with 1/r, so the encoding carries both which grid
cell r falls in and how strong the amplification is.
"""

from __future__ import annotations

import math

import torch

from uhdrtrainer.data import EncodingSpec

SQRT_2PI = math.sqrt(2.0 * math.pi)


def pixel_ratio(amplification: torch.Tensor, ratio: torch.Tensor) -> torch.Tensor:
    """Per-pixel effective amplification r = R / mean-over-planes(ratio).

    amplification: [B] total brightening factors.
    ratio: [B, 4, h, w] predicted or stored brightening map.
    Returns [B, h, w].
    """
    return amplification.view(-1, 1, 1) / ratio.mean(dim=1)


def gaussian_encoding(r: torch.Tensor, spec: EncodingSpec) -> torch.Tensor:
    """Expand per-pixel amplification [B, h, w] to [B, dims, h, w]."""
    grid = torch.linspace(spec.r_lo, spec.r_hi, spec.dims, dtype=r.dtype)
    clamped = r.clamp(spec.r_lo, spec.r_hi).unsqueeze(1)
    diff = clamped - grid.view(1, -1, 1, 1)
    bumps = torch.exp(-(diff * diff) / (2.0 * spec.sigma * spec.sigma))
    return bumps / ((SQRT_2PI * spec.sigma) * clamped)
