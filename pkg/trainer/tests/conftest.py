"""Shared fixtures: a synthesized toy dataset and one smoke training run.

The dataset is produced by the real `rawuhdr synth-dataset` command so
the trainer is exercised against files the toolkit actually writes,
not against hand-rolled lookalikes. Source tiles are smooth random
fields; flat noise would leave nothing for the networks to learn.
"""

import subprocess

import numpy as np
import pytest
import torch

from uhdrtrainer import (
    PackedTile,
    load_dataset,
    train_denoiser,
    train_ratio_estimator,
    write_packed,
)

PROFILE_YAML = """\
name: trainer-cam
wb_gains: [2.0, 1.0, 1.6]
ccm:
  - [1.70, -0.55, -0.15]
  - [-0.20, 1.45, -0.25]
  - [0.05, -0.45, 1.40]
gamma: srgb
noise:
  log_k_min: -11.5
  log_k_max: -9.0
  read_slope: 0.85
  read_intercept: 0.4
  read_scatter: 0.1
  row_sigma_ratio: 0.2
  quant_step: 6.3e-05
"""

CONFIG_YAML = """\
n_stops: 5
samples_per_image: 1
highlight:
  n_patches: [1, 2]
  patch_radius: [4.0, 12.0]
  gain: [2.0, 6.0]
  bilateral_spatial_sigma: 2.0
  bilateral_range_sigma: 0.1
  feather_sigma: 3.0
"""

N_SOURCES = 16
TILE = 64


def smooth_planes(rng: np.random.Generator) -> np.ndarray:
    """Low-frequency random field in [0.02, 0.55], one tile."""
    coarse = torch.from_numpy(rng.random((1, 4, 8, 8), dtype=np.float32))
    fine = torch.nn.functional.interpolate(
        coarse, size=(TILE, TILE), mode="bilinear", align_corners=False
    )
    return (0.02 + 0.53 * fine[0].numpy()).astype(np.float32)


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("smoke")
    profile = root / "profile.yaml"
    profile.write_text(PROFILE_YAML)
    config = root / "config.yaml"
    config.write_text(CONFIG_YAML)
    src = root / "src"
    src.mkdir()
    rng = np.random.default_rng(2026)
    for i in range(N_SOURCES):
        tile = PackedTile(
            planes=smooth_planes(rng),
            bayer_pattern="RGGB",
            black_level=(64.0,) * 4,
            white_level=1023.0,
            iso=800.0,
            exposure_time=0.02,
        )
        write_packed(src / f"scene{i:02d}.uraw", tile)
    out = root / "data"
    subprocess.run(
        [
            "rawuhdr",
            "synth-dataset",
            str(src),
            "--profile",
            str(profile),
            "--config",
            str(config),
            "--seed",
            "7",
            "--workers",
            "4",
            "--out",
            str(out),
        ],
        check=True,
        capture_output=True,
        text=True,
    )
    return out


@pytest.fixture(scope="session")
def dataset(dataset_dir):
    return load_dataset(dataset_dir / "manifest.yaml")


@pytest.fixture(scope="session")
def smoke_run(dataset, tmp_path_factory):
    """One 200-iteration run of both stages, shared across tests."""
    out = tmp_path_factory.mktemp("run")
    estimator = train_ratio_estimator(
        dataset, out, iters=200, batch_size=4, seed=1
    )
    estimator_bytes_before = {
        k: v.numpy().tobytes() for k, v in estimator.model.state_dict().items()
    }
    denoiser = train_denoiser(
        dataset, estimator.model, out, iters=200, batch_size=4, seed=2
    )
    estimator_bytes_after = {
        k: v.numpy().tobytes() for k, v in estimator.model.state_dict().items()
    }
    return {
        "out": out,
        "estimator": estimator,
        "denoiser": denoiser,
        "estimator_bytes_before": estimator_bytes_before,
        "estimator_bytes_after": estimator_bytes_after,
    }
