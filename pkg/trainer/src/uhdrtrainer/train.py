"""Two-stage training loop.

Stage one fits the ratio estimator: the amplified noisy image goes in,
the stored brightening map is the target, and the loss is the
target-weighted L1. Stage two freezes the estimator and fits the
denoiser on exposure-corrected inputs with the per-pixel amplification
encoding injected at every encoder scale, under plain L1 against the
clean reference.

Both stages write a checkpoint and a CSV loss curve into the output
directory. Training is single-process and deterministic for a fixed
seed at least through the first iterations; beyond that, framework
scheduling noise is tolerated.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterator

import torch

from uhdrtrainer.data import TileDataset
from uhdrtrainer.encoding import gaussian_encoding, pixel_ratio
from uhdrtrainer.losses import l1, weighted_l1
from uhdrtrainer.unet import UNet, UNetConfig

# Predicted brightening maps are divided into the noisy input; the softplus
# head keeps them positive but can underflow to zero, so corrections are
# floored here.
RATIO_FLOOR = 1e-6


class EmptyDatasetError(ValueError):
    """Training was asked to run on a dataset with no samples."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; training state is unusable."""


@dataclass(frozen=True)
class TrainResult:
    losses: tuple[float, ...]
    checkpoint: Path
    loss_csv: Path
    model: UNet


def _batch_indices(
    n: int, batch_size: int, iters: int, seed: int
) -> Iterator[torch.Tensor]:
    """Yield one index tensor per iteration.

    When the batch covers the whole dataset the same ordered full batch
    is reused every iteration, which keeps reduction order fixed and
    the loss curve exactly constant under lr = 0.
    """
    if batch_size >= n:
        full = torch.arange(n)
        for _ in range(iters):
            yield full
    else:
        gen = torch.Generator().manual_seed(seed)
        for _ in range(iters):
            yield torch.randint(n, (batch_size,), generator=gen)


def _write_loss_csv(path: Path, losses: list[float]) -> None:
    rows = "".join(f"{i},{loss!r}\n" for i, loss in enumerate(losses, start=1))
    path.write_text("iteration,loss\n" + rows)


def _fit(
    model: UNet,
    loss_for_batch: Callable[[torch.Tensor], torch.Tensor],
    n_samples: int,
    out_dir: Path,
    stem: str,
    iters: int,
    lr: float,
    batch_size: int,
    seed: int,
) -> TrainResult:
    out_dir.mkdir(parents=True, exist_ok=True)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    losses: list[float] = []
    for iteration, idx in enumerate(
        _batch_indices(n_samples, batch_size, iters, seed), start=1
    ):
        loss = loss_for_batch(idx)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDiverged(
                f"{stem}: loss became non-finite at iteration {iteration} "
                f"(value {value!r})"
            )
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
        losses.append(value)

    checkpoint = out_dir / f"{stem}.pt"
    torch.save(
        {
            "config": asdict(model.config),
            "head": model.head_kind,
            "enc_channels": model.enc_channels,
            "state_dict": model.state_dict(),
        },
        checkpoint,
    )
    loss_csv = out_dir / f"{stem}_loss.csv"
    _write_loss_csv(loss_csv, losses)
    return TrainResult(
        losses=tuple(losses), checkpoint=checkpoint, loss_csv=loss_csv, model=model
    )


def train_ratio_estimator(
    dataset: TileDataset,
    out_dir: str | Path,
    iters: int = 30000,
    lr: float = 5e-5,
    batch_size: int = 4,
    seed: int = 0,
    eps: float = 1e-2,
) -> TrainResult:
    """Fit the brightening-map estimator.

    The network sees the amplified noisy image and regresses the stored
    ratio map under target-weighted L1. Writes estimator.pt and
    estimator_loss.csv into out_dir.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot train the estimator on an empty dataset")
    torch.manual_seed(seed)
    model = UNet(UNetConfig(), head="softplus")

    def loss_for_batch(idx: torch.Tensor) -> torch.Tensor:
        pred = model(dataset.noisy[idx])
        return weighted_l1(pred, dataset.ratio[idx], eps)

    return _fit(
        model,
        loss_for_batch,
        len(dataset),
        Path(out_dir),
        "estimator",
        iters,
        lr,
        batch_size,
        seed,
    )


def train_denoiser(
    dataset: TileDataset,
    estimator: UNet,
    out_dir: str | Path,
    iters: int = 30000,
    lr: float = 5e-5,
    batch_size: int = 4,
    seed: int = 0,
) -> TrainResult:
    """Fit the denoiser against the frozen estimator.

    Each step runs the estimator without gradients, corrects the noisy
    input by the predicted map, derives the per-pixel amplification
    r = R / mean(S̃), and trains the denoiser on the corrected image
    with the Gaussian encoding of r injected per scale. Writes
    denoiser.pt and denoiser_loss.csv into out_dir. The estimator is
    never updated.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot train the denoiser on an empty dataset")
    estimator.eval()
    torch.manual_seed(seed)
    model = UNet(UNetConfig(), head="linear", enc_channels=dataset.encoding.dims)

    def loss_for_batch(idx: torch.Tensor) -> torch.Tensor:
        noisy = dataset.noisy[idx]
        with torch.no_grad():
            s_hat = estimator(noisy).clamp_min(RATIO_FLOOR)
            corrected = noisy / s_hat
            r = pixel_ratio(dataset.amplification[idx], s_hat)
            enc = gaussian_encoding(r, dataset.encoding)
        pred = model(corrected, enc)
        return l1(pred, dataset.reference[idx])

    return _fit(
        model,
        loss_for_batch,
        len(dataset),
        Path(out_dir),
        "denoiser",
        iters,
        lr,
        batch_size,
        seed,
    )


def load_checkpoint(path: str | Path) -> UNet:
    """Rebuild a network from a checkpoint written by the training loop."""
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = UNet(
        UNetConfig(**payload["config"]),
        head=payload["head"],
        enc_channels=payload["enc_channels"],
    )
    model.load_state_dict(payload["state_dict"])
    return model
