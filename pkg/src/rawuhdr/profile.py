"""Camera profiles: white balance, color matrix, transfer curve, noise calibration.

Profiles are plain YAML so they can be inspected and versioned alongside
captures. Schema (all keys required):

    name: <string>
    wb_gains: [r, g, b]          # multiplicative, > 0
    ccm: [[...], [...], [...]]   # camera RGB -> linear sRGB, rows sum to 1
    gamma: srgb
    noise:
      log_k_min: <float>         # system gain K sampled log-uniformly
      log_k_max: <float>
      read_slope: <float>        # log sigma_read = slope * log K + intercept
      read_intercept: <float>
      read_scatter: <float>      # gaussian scatter around the fit, >= 0
      row_sigma_ratio: <float>   # row-noise sigma as fraction of read sigma
      quant_step: <float>        # quantization step, normalized units
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import yaml

from .errors import ProfileError

_NOISE_KEYS = (
    "log_k_min",
    "log_k_max",
    "read_slope",
    "read_intercept",
    "read_scatter",
    "row_sigma_ratio",
    "quant_step",
)

_CCM_MAX_CONDITION = 1e3


@dataclass(frozen=True)
class NoiseParams:
    log_k_min: float
    log_k_max: float
    read_slope: float
    read_intercept: float
    read_scatter: float
    row_sigma_ratio: float
    quant_step: float

    def __post_init__(self):
        if not self.log_k_min < self.log_k_max:
            raise ProfileError(
                f"log_k_min {self.log_k_min} must be below log_k_max {self.log_k_max}"
            )
        if self.read_scatter < 0:
            raise ProfileError(f"read_scatter must be >= 0, got {self.read_scatter}")
        if self.row_sigma_ratio < 0:
            raise ProfileError(
                f"row_sigma_ratio must be >= 0, got {self.row_sigma_ratio}"
            )
        if self.quant_step < 0:
            raise ProfileError(f"quant_step must be >= 0, got {self.quant_step}")


@dataclass(frozen=True)
class CameraProfile:
    name: str
    wb_gains: tuple[float, float, float]
    ccm: np.ndarray
    gamma: str
    noise: NoiseParams

    def __post_init__(self):
        wb = np.asarray(self.wb_gains, dtype=np.float64)
        if wb.shape != (3,) or not np.all(wb > 0):
            raise ProfileError(f"wb_gains must be 3 positive floats, got {self.wb_gains}")
        ccm = np.asarray(self.ccm, dtype=np.float64)
        if ccm.shape != (3, 3):
            raise ProfileError(f"ccm must be 3x3, got shape {ccm.shape}")
        row_sums = ccm.sum(axis=1)
        if not np.allclose(row_sums, 1.0, atol=1e-6):
            raise ProfileError(f"ccm rows must sum to 1, got {row_sums.tolist()}")
        cond = np.linalg.cond(ccm)
        if not np.isfinite(cond) or cond >= _CCM_MAX_CONDITION:
            raise ProfileError(f"ccm condition number {cond:.3g} exceeds {_CCM_MAX_CONDITION:g}")
        if self.gamma != "srgb":
            raise ProfileError(f"unsupported gamma {self.gamma!r}, only 'srgb' is defined")
        wb.flags.writeable = False
        ccm.flags.writeable = False
        object.__setattr__(self, "wb_gains", wb)
        object.__setattr__(self, "ccm", ccm)


def read_profile(path) -> CameraProfile:
    """Load and validate a YAML camera profile."""
    with open(path, "r") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ProfileError(f"{path}: not parseable YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProfileError(f"{path}: profile must be a mapping")
    for key in ("wb_gains", "ccm", "gamma", "noise"):
        if key not in doc:
            raise ProfileError(f"{path}: missing key {key!r}")
    noise_doc = doc["noise"]
    if not isinstance(noise_doc, dict):
        raise ProfileError(f"{path}: noise block must be a mapping")
    missing = [k for k in _NOISE_KEYS if k not in noise_doc]
    if missing:
        raise ProfileError(f"{path}: noise block missing {missing}")
    extra = [k for k in noise_doc if k not in _NOISE_KEYS]
    if extra:
        raise ProfileError(f"{path}: noise block has unknown keys {extra}")
    try:
        noise = NoiseParams(**{k: float(noise_doc[k]) for k in _NOISE_KEYS})
        return CameraProfile(
            name=str(doc.get("name", "unnamed")),
            wb_gains=tuple(float(g) for g in doc["wb_gains"]),
            ccm=np.asarray(doc["ccm"], dtype=np.float64),
            gamma=str(doc["gamma"]),
            noise=noise,
        )
    except (TypeError, ValueError) as exc:
        raise ProfileError(f"{path}: {exc}") from exc
