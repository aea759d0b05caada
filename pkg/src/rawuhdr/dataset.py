"""Dataset synthesis: clean sources into (noisy, ratio, reference) triples.

Each sample lives in its own directory as three URAW files plus a
provenance record that is sufficient to rebuild the sample bit-exactly:
the highlight spec with its derived stream seed, the drawn noise
parameters with theirs, and the fusion settings. A dataset-level manifest
lists every sample with its provenance and the global configuration.

Per-sample randomness is derived from the dataset seed and the sample's
global index, so outputs are byte-identical regardless of worker count
or scheduling.
"""

from __future__ import annotations

import logging
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .encoding import EncodingSpec
from .errors import ConfigError, ManifestError
from .fusion import EPSILON_RATIO, RatioMap, fuse_to_raw, ratio_map
from .highlights import HighlightSpec, amplify
from .noise import (
    DEFAULT_RATIO_BOUNDS,
    NoiseSample,
    sample_noise_params,
    synthesize_noisy,
)
from .profile import CameraProfile
from .raw import PackedRaw, RawImage, pack, read_uraw, read_uraw_header, write_uraw

log = logging.getLogger(__name__)

DATASET_VERSION = 1
MANIFEST_NAME = "manifest.yaml"
PROVENANCE_NAME = "provenance.yaml"
SAMPLE_FILE_KEYS = ("noisy", "ratio", "reference")

DEFAULT_HIGHLIGHT = HighlightSpec(
    n_patches=(1, 4), patch_radius=(4.0, 24.0), gain=(2.0, 8.0)
)

_CONFIG_SCALARS = (
    "n_stops",
    "samples_per_image",
    "ratio_min",
    "ratio_max",
    "noise_family",
    "fusion_levels",
    "epsilon_ratio",
)


@dataclass(frozen=True)
class SynthConfig:
    """Global synthesis settings; every field lands in the manifest."""

    n_stops: int = 9
    samples_per_image: int = 1
    ratio_min: float = DEFAULT_RATIO_BOUNDS[0]
    ratio_max: float = DEFAULT_RATIO_BOUNDS[1]
    noise_family: str = "full"
    fusion_levels: int | None = None
    epsilon_ratio: float = EPSILON_RATIO
    highlight: HighlightSpec = DEFAULT_HIGHLIGHT
    encoding: EncodingSpec = EncodingSpec()

    def __post_init__(self):
        if self.n_stops < 1:
            raise ConfigError(f"n_stops must be >= 1, got {self.n_stops}")
        if self.samples_per_image < 1:
            raise ConfigError(
                f"samples_per_image must be >= 1, got {self.samples_per_image}"
            )
        if not (1.0 <= self.ratio_min <= self.ratio_max):
            raise ConfigError(
                f"need 1 <= ratio_min <= ratio_max, got "
                f"[{self.ratio_min}, {self.ratio_max}]"
            )
        if self.noise_family not in ("full", "pg"):
            raise ConfigError(f"unknown noise family {self.noise_family!r}")
        if self.fusion_levels is not None and self.fusion_levels < 1:
            raise ConfigError(f"fusion_levels must be >= 1, got {self.fusion_levels}")
        if not self.epsilon_ratio > 0:
            raise ConfigError(
                f"epsilon_ratio must be positive, got {self.epsilon_ratio}"
            )


def config_from_dict(data: dict) -> SynthConfig:
    data = dict(data)
    kwargs = {}
    highlight = data.pop("highlight", None)
    encoding = data.pop("encoding", None)
    unknown = set(data) - set(_CONFIG_SCALARS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs.update(data)
    if highlight is not None:
        fields = dict(highlight)
        for name in ("n_patches", "patch_radius", "gain"):
            if name in fields:
                fields[name] = tuple(fields[name])
        try:
            kwargs["highlight"] = HighlightSpec(**fields)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"highlight block: {exc}") from exc
    if encoding is not None:
        try:
            kwargs["encoding"] = EncodingSpec(**encoding)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"encoding block: {exc}") from exc
    try:
        return SynthConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> SynthConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return config_from_dict(data)


def config_to_dict(config: SynthConfig) -> dict:
    hl = config.highlight
    enc = config.encoding
    return {
        "n_stops": config.n_stops,
        "samples_per_image": config.samples_per_image,
        "ratio_min": float(config.ratio_min),
        "ratio_max": float(config.ratio_max),
        "noise_family": config.noise_family,
        "fusion_levels": config.fusion_levels,
        "epsilon_ratio": float(config.epsilon_ratio),
        "highlight": {
            "n_patches": [int(hl.n_patches[0]), int(hl.n_patches[1])],
            "patch_radius": [float(hl.patch_radius[0]), float(hl.patch_radius[1])],
            "gain": [float(hl.gain[0]), float(hl.gain[1])],
            "bilateral_spatial_sigma": float(hl.bilateral_spatial_sigma),
            "bilateral_range_sigma": float(hl.bilateral_range_sigma),
            "feather_sigma": float(hl.feather_sigma),
        },
        "encoding": {
            "sigma": float(enc.sigma),
            "dims": int(enc.dims),
            "r_lo": float(enc.r_lo),
            "r_hi": float(enc.r_hi),
        },
    }


def sample_seeds(seed: int, index: int) -> tuple[int, int]:
    """Independent (highlight, noise) stream seeds for one sample index."""
    children = np.random.SeedSequence(entropy=seed, spawn_key=(index,)).spawn(2)
    return tuple(int(c.generate_state(1, dtype=np.uint64)[0]) for c in children)


@dataclass(frozen=True)
class DatasetSample:
    id: str
    noisy: PackedRaw
    ratio: RatioMap
    reference: PackedRaw
    provenance: dict


def check_recoverable(lighted: PackedRaw, fused: PackedRaw, ratio: RatioMap, eps: float):
    """Write-time guard: the float32-stored ratio must reproduce I_L.

    Tolerance is four float32 ULPs at each stored value's own scale,
    floored at unit scale so exact zeros in I_L stay checkable.
    """
    s32 = ratio.values.astype(np.float32).astype(np.float64)
    rebuilt = s32 * (fused.planes.astype(np.float64) + eps)
    target = lighted.planes.astype(np.float64)
    tol = 4.0 * np.spacing(np.maximum(np.abs(lighted.planes), np.float32(1.0)))
    err = np.abs(rebuilt - target)
    if np.any(err > tol):
        raise ManifestError(
            "stored ratio does not reproduce the amplified image: "
            f"max error {float(err.max()):.3e}"
        )


def synthesize_sample(
    clean: PackedRaw,
    profile: CameraProfile,
    config: SynthConfig,
    sample_id: str,
    source: str,
    highlight_seed: int,
    noise_seed: int,
) -> DatasetSample:
    """Run one source through highlight, fusion, ratio, and noise stages."""
    lighted = amplify(clean, config.highlight, np.random.default_rng(highlight_seed))
    fused = fuse_to_raw(
        lighted, profile, config.n_stops, levels=config.fusion_levels
    )
    ratio = ratio_map(lighted, fused, eps=config.epsilon_ratio)
    noise = sample_noise_params(
        profile,
        np.random.default_rng(noise_seed),
        (config.ratio_min, config.ratio_max),
        config.noise_family,
    )
    noisy = synthesize_noisy(lighted, noise)
    check_recoverable(lighted, fused, ratio, config.epsilon_ratio)
    hl = config.highlight
    provenance = {
        "id": sample_id,
        "source": source,
        "profile": profile.name,
        "n_stops": config.n_stops,
        "fusion_levels": config.fusion_levels,
        "epsilon_ratio": float(config.epsilon_ratio),
        "noise_family": config.noise_family,
        "highlight": {
            "n_patches": [int(hl.n_patches[0]), int(hl.n_patches[1])],
            "patch_radius": [float(hl.patch_radius[0]), float(hl.patch_radius[1])],
            "gain": [float(hl.gain[0]), float(hl.gain[1])],
            "bilateral_spatial_sigma": float(hl.bilateral_spatial_sigma),
            "bilateral_range_sigma": float(hl.bilateral_range_sigma),
            "feather_sigma": float(hl.feather_sigma),
            "seed": int(highlight_seed),
        },
        "noise": {
            "k": float(noise.K),
            "ratio": float(noise.R),
            "read_sigma": float(noise.read_sigma),
            "row_sigma": float(noise.row_sigma),
            "quant_step": float(noise.quant_step),
            "seed": int(noise.seed),
        },
        "noise_stream_seed": int(noise_seed),
    }
    return DatasetSample(
        id=sample_id, noisy=noisy, ratio=ratio, reference=fused, provenance=provenance
    )


def regenerate_sample(
    clean: PackedRaw, profile: CameraProfile, provenance: dict
) -> tuple[PackedRaw, RatioMap, PackedRaw]:
    """Rebuild (noisy, ratio, reference) from a provenance record alone."""
    hl = provenance["highlight"]
    spec = HighlightSpec(
        n_patches=tuple(hl["n_patches"]),
        patch_radius=tuple(hl["patch_radius"]),
        gain=tuple(hl["gain"]),
        bilateral_spatial_sigma=hl["bilateral_spatial_sigma"],
        bilateral_range_sigma=hl["bilateral_range_sigma"],
        feather_sigma=hl["feather_sigma"],
    )
    lighted = amplify(clean, spec, np.random.default_rng(hl["seed"]))
    fused = fuse_to_raw(
        lighted, profile, provenance["n_stops"], levels=provenance["fusion_levels"]
    )
    ratio = ratio_map(lighted, fused, eps=provenance["epsilon_ratio"])
    nz = provenance["noise"]
    noise = NoiseSample(
        K=nz["k"],
        R=nz["ratio"],
        read_sigma=nz["read_sigma"],
        row_sigma=nz["row_sigma"],
        quant_step=nz["quant_step"],
        seed=nz["seed"],
    )
    return synthesize_noisy(lighted, noise), ratio, fused


def load_clean(path) -> PackedRaw:
    """Read a source URAW; mosaics are packed, packed files pass through."""
    image = read_uraw(path)
    if isinstance(image, RawImage):
        return pack(image)
    return image


def write_sample(samples_dir, sample: DatasetSample) -> Path:
    """Write the three URAW files plus provenance; nothing survives failure."""
    sample_dir = Path(samples_dir) / sample.id
    if sample_dir.exists():
        shutil.rmtree(sample_dir)
    sample_dir.mkdir(parents=True)
    try:
        write_uraw(sample.noisy, sample_dir / "noisy.uraw")
        ratio_packed = sample.reference.with_planes(
            sample.ratio.values.astype(np.float32)
        )
        write_uraw(ratio_packed, sample_dir / "ratio.uraw")
        write_uraw(sample.reference, sample_dir / "reference.uraw")
        (sample_dir / PROVENANCE_NAME).write_text(
            yaml.safe_dump(sample.provenance, sort_keys=True)
        )
    except BaseException:
        shutil.rmtree(sample_dir, ignore_errors=True)
        raise
    return sample_dir


@dataclass(frozen=True)
class Manifest:
    version: int
    profile: str
    seed: int
    config: dict
    samples: tuple


def manifest_to_dict(manifest: Manifest) -> dict:
    return {
        "dataset_version": manifest.version,
        "profile": manifest.profile,
        "seed": manifest.seed,
        "config": manifest.config,
        "samples": list(manifest.samples),
    }


def write_manifest(manifest: Manifest, path):
    Path(path).write_text(yaml.safe_dump(manifest_to_dict(manifest), sort_keys=True))


def load_manifest(path, check_files: bool = True) -> Manifest:
    """Parse a manifest; optionally verify every listed file's header."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ManifestError(f"{path}: manifest must be a mapping")
    missing = {"dataset_version", "profile", "seed", "config", "samples"} - set(data)
    if missing:
        raise ManifestError(f"{path}: missing keys {sorted(missing)}")
    if data["dataset_version"] != DATASET_VERSION:
        raise ManifestError(
            f"{path}: unsupported dataset version {data['dataset_version']}"
        )
    samples = data["samples"] or []
    if check_files:
        root = path.parent
        for entry in samples:
            for key in SAMPLE_FILE_KEYS:
                rel = entry["files"][key]
                target = root / rel
                if not target.exists():
                    raise ManifestError(f"{path}: listed file missing: {rel}")
                try:
                    read_uraw_header(target)
                except Exception as exc:
                    raise ManifestError(f"{path}: {rel}: {exc}") from exc
            prov = root / entry["files"]["provenance"]
            if not prov.exists():
                raise ManifestError(
                    f"{path}: listed file missing: {entry['files']['provenance']}"
                )
    return Manifest(
        version=data["dataset_version"],
        profile=data["profile"],
        seed=data["seed"],
        config=data["config"],
        samples=tuple(samples),
    )


def _synth_job(args) -> dict:
    (source_path, sample_id, index, seed, config, profile, samples_dir) = args
    clean = load_clean(source_path)
    highlight_seed, noise_seed = sample_seeds(seed, index)
    sample = synthesize_sample(
        clean,
        profile,
        config,
        sample_id,
        str(source_path),
        highlight_seed,
        noise_seed,
    )
    write_sample(samples_dir, sample)
    base = f"samples/{sample_id}"
    return {
        "id": sample_id,
        "source": str(source_path),
        "files": {
            "noisy": f"{base}/noisy.uraw",
            "ratio": f"{base}/ratio.uraw",
            "reference": f"{base}/reference.uraw",
            "provenance": f"{base}/{PROVENANCE_NAME}",
        },
        "highlight_seed": sample.provenance["highlight"]["seed"],
        "noise_stream_seed": sample.provenance["noise_stream_seed"],
        "noise": dict(sample.provenance["noise"]),
        "n_stops": config.n_stops,
    }


def synth_dataset(
    src_dir,
    out_dir,
    profile: CameraProfile,
    config: SynthConfig,
    seed: int,
    workers: int = 1,
    profile_ref: str | None = None,
) -> Manifest:
    """Synthesize every source in src_dir into out_dir and write the manifest.

    Deterministic for fixed (sources, profile, config, seed) independent of
    `workers`. A failing sample removes its own partial files and aborts the
    run before any manifest is written.
    """
    src_dir = Path(src_dir)
    out_dir = Path(out_dir)
    sources = sorted(src_dir.glob("*.uraw"))
    if not sources:
        log.warning("no .uraw sources found in %s", src_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples_dir = out_dir / "samples"
    jobs = []
    for i, src in enumerate(sources):
        for k in range(config.samples_per_image):
            index = i * config.samples_per_image + k
            sample_id = f"{src.stem}-{k:02d}"
            jobs.append((str(src), sample_id, index, seed, config, profile, samples_dir))
    if workers <= 1 or len(jobs) <= 1:
        entries = [_synth_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_synth_job, jobs))
    manifest = Manifest(
        version=DATASET_VERSION,
        profile=profile_ref if profile_ref is not None else profile.name,
        seed=seed,
        config=config_to_dict(config),
        samples=tuple(entries),
    )
    write_manifest(manifest, out_dir / MANIFEST_NAME)
    return manifest
