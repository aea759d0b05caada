"""Dataset loading from synthesis manifests.

A dataset directory is a ``manifest.yaml`` plus per-sample packed RAW
files. The manifest carries relative paths for each sample's noisy
input, its brightening-ratio target, and its clean reference, together
with the drawn amplification level and the Gaussian-grid encoding
parameters the dataset was synthesized with. Everything is loaded
eagerly into float32 tensors; the datasets this trainer targets are
toy-scale and fit comfortably in memory.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
import yaml

from uhdrtrainer.uraw import read_packed


class DatasetError(ValueError):
    """Manifest missing, malformed, or inconsistent with its files."""


@dataclass(frozen=True)
class EncodingSpec:
    """Parameters of the Gaussian amplification encoding."""

    sigma: float = 30.0
    dims: int = 64
    r_lo: float = 1.0
    r_hi: float = 320.0

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise DatasetError(f"encoding sigma must be positive, got {self.sigma}")
        if self.dims < 1:
            raise DatasetError(f"encoding dims must be >= 1, got {self.dims}")
        if not 0 < self.r_lo < self.r_hi:
            raise DatasetError(
                f"encoding range must satisfy 0 < r_lo < r_hi, "
                f"got [{self.r_lo}, {self.r_hi}]"
            )


@dataclass(frozen=True)
class TileDataset:
    """All samples of one synthesized dataset, stacked.

    noisy, ratio, reference: float32 tensors of shape [N, 4, h, w].
    amplification: float32 tensor of shape [N], the total brightening
    factor each noisy sample was synthesized for.
    """

    noisy: torch.Tensor
    ratio: torch.Tensor
    reference: torch.Tensor
    amplification: torch.Tensor
    ids: tuple[str, ...]
    encoding: EncodingSpec

    def __len__(self) -> int:
        return self.noisy.shape[0]


def _require(mapping: dict, key: str, context: str):
    if not isinstance(mapping, dict) or key not in mapping:
        raise DatasetError(f"manifest {context} is missing {key!r}")
    return mapping[key]


def _load_planes(path: Path) -> torch.Tensor:
    tile = read_packed(path)
    return torch.from_numpy(tile.planes)


def load_dataset(manifest_path: str | Path) -> TileDataset:
    """Read a manifest and every file it references.

    Raises DatasetError if the manifest cannot be parsed, a referenced
    file is absent, or sample shapes disagree.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DatasetError(f"manifest not found: {manifest_path}")
    try:
        doc = yaml.safe_load(manifest_path.read_text())
    except yaml.YAMLError as exc:
        raise DatasetError(f"{manifest_path}: not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise DatasetError(f"{manifest_path}: manifest root must be a mapping")

    config = _require(doc, "config", "root")
    enc = _require(config, "encoding", "config")
    encoding = EncodingSpec(
        sigma=float(_require(enc, "sigma", "config.encoding")),
        dims=int(_require(enc, "dims", "config.encoding")),
        r_lo=float(_require(enc, "r_lo", "config.encoding")),
        r_hi=float(_require(enc, "r_hi", "config.encoding")),
    )

    entries = _require(doc, "samples", "root")
    if entries is None:
        entries = []
    if not isinstance(entries, list):
        raise DatasetError(f"{manifest_path}: samples must be a list")

    base = manifest_path.parent
    noisy, ratio, reference, amplification, ids = [], [], [], [], []
    for i, entry in enumerate(entries):
        files = _require(entry, "files", f"samples[{i}]")
        noise = _require(entry, "noise", f"samples[{i}]")
        sample_id = str(_require(entry, "id", f"samples[{i}]"))
        paths = {
            field: base / str(_require(files, field, f"samples[{i}].files"))
            for field in ("noisy", "ratio", "reference")
        }
        for field, path in paths.items():
            if not path.is_file():
                raise DatasetError(
                    f"{manifest_path}: sample {sample_id} references "
                    f"missing {field} file {path}"
                )
        noisy.append(_load_planes(paths["noisy"]))
        ratio.append(_load_planes(paths["ratio"]))
        reference.append(_load_planes(paths["reference"]))
        amplification.append(float(_require(noise, "ratio", f"samples[{i}].noise")))
        ids.append(sample_id)

    if noisy:
        shape = noisy[0].shape
        for tensor in (*noisy, *ratio, *reference):
            if tensor.shape != shape:
                raise DatasetError(
                    f"{manifest_path}: sample shapes disagree "
                    f"({tuple(tensor.shape)} vs {tuple(shape)})"
                )
        stacked = (
            torch.stack(noisy),
            torch.stack(ratio),
            torch.stack(reference),
            torch.tensor(amplification, dtype=torch.float32),
        )
    else:
        empty = torch.empty(0, 4, 0, 0)
        stacked = (empty, empty.clone(), empty.clone(), torch.empty(0))

    return TileDataset(
        noisy=stacked[0],
        ratio=stacked[1],
        reference=stacked[2],
        amplification=stacked[3],
        ids=tuple(ids),
        encoding=encoding,
    )
