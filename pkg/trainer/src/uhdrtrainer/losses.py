"""Training losses.

The ratio estimator minimizes an L1 weighted by the inverse of the
target brightening map, so errors at strong amplification (dark
regions, large ratios) are not drowned out by the already-bright ones:

    loss = mean( |target - pred| / (target + eps) )

The denoiser uses plain L1 against the clean reference.
"""

from __future__ import annotations

import torch


def weighted_l1(
    pred: torch.Tensor, target: torch.Tensor, eps: float = 1e-2
) -> torch.Tensor:
    """Relative L1 with the denominator taken from the target."""
    return ((target - pred).abs() / (target + eps)).mean()


def l1(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return (target - pred).abs().mean()
