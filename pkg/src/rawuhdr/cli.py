"""Command-line surface: dataset synthesis, single pipeline stages, evaluation.

Every package error class maps to its own exit code so scripted callers can
branch on the failure mode:

    3  malformed file (bad magic, bad payload geometry)
    4  unsupported container version
    5  truncated file
    6  invalid camera profile
    7  invalid configuration
    8  manifest integrity failure
    9  shape or geometry mismatch
    10 value out of range
    11 other toolkit error
    12 filesystem error
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .dataset import SynthConfig, load_clean, load_config, synth_dataset
from .encoding import ENCODERS, EncodingSpec, encode, pixel_ratio, write_uenc
from .errors import (
    ConfigError,
    DimensionError,
    FormatError,
    ManifestError,
    ProfileError,
    RawUhdrError,
    TruncatedPayloadError,
    ValueRangeError,
    VersionError,
)
from .fusion import EPSILON_RATIO, RatioMap, fuse_to_raw, ratio_map
from .isp import render
from .metrics import evaluate_pair
from .noise import sample_noise_params, synthesize_noisy
from .profile import read_profile
from .raw import write_uraw
from .report import save_rgb, write_metric_figures, write_metrics_csv

# most derived classes first so isinstance dispatch picks the specific code
EXIT_CODES = (
    (VersionError, 4),
    (TruncatedPayloadError, 5),
    (FormatError, 3),
    (ProfileError, 6),
    (ConfigError, 7),
    (ManifestError, 8),
    (DimensionError, 9),
    (ValueRangeError, 10),
    (RawUhdrError, 11),
)


def exit_code_for(exc: BaseException) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return 1


class ErrorMappedGroup(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (click.ClickException, click.Abort):
            raise
        except RawUhdrError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exit_code_for(exc))
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(12)


@click.group(cls=ErrorMappedGroup)
@click.version_option(__version__)
def main():
    """RAW-domain UHDR training-data synthesis and evaluation."""


_profile_option = click.option(
    "--profile",
    "profile_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="camera profile YAML",
)
_out_option = click.option("--out", "out_path", required=True, type=click.Path())


@main.command("synth-dataset")
@click.argument("src_dir", type=click.Path(exists=True, file_okay=False))
@_profile_option
@_out_option
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    help="synthesis config YAML",
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--stops", type=int, default=None, help="override n_stops")
@click.option("--ratio-min", type=float, default=None)
@click.option("--ratio-max", type=float, default=None)
@click.option("--sigma", type=float, default=None, help="override encoding sigma")
@click.option("--dims", type=int, default=None, help="override encoding grid size")
@click.option("--samples-per-image", type=int, default=None)
@click.option("--workers", type=int, default=1, show_default=True)
def cmd_synth_dataset(
    src_dir,
    profile_path,
    out_path,
    config_path,
    seed,
    stops,
    ratio_min,
    ratio_max,
    sigma,
    dims,
    samples_per_image,
    workers,
):
    """Synthesize a training dataset from clean URAW sources."""
    profile = read_profile(profile_path)
    config = load_config(config_path) if config_path else SynthConfig()
    changes = {}
    if stops is not None:
        changes["n_stops"] = stops
    if ratio_min is not None:
        changes["ratio_min"] = ratio_min
    if ratio_max is not None:
        changes["ratio_max"] = ratio_max
    if samples_per_image is not None:
        changes["samples_per_image"] = samples_per_image
    enc_changes = {}
    if sigma is not None:
        enc_changes["sigma"] = sigma
    if dims is not None:
        enc_changes["dims"] = dims
    if enc_changes:
        try:
            changes["encoding"] = replace(config.encoding, **enc_changes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if changes:
        config = replace(config, **changes)
    manifest = synth_dataset(
        src_dir,
        out_path,
        profile,
        config,
        seed,
        workers=workers,
        profile_ref=str(profile_path),
    )
    if not manifest.samples:
        click.echo("warning: no .uraw sources found, wrote an empty manifest", err=True)
    click.echo(f"wrote {len(manifest.samples)} samples to {out_path}")


@main.command("fuse")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@_profile_option
@_out_option
@click.option("--stops", type=int, default=9, show_default=True)
@click.option("--levels", type=int, default=None, help="pyramid levels")
def cmd_fuse(input_path, profile_path, out_path, stops, levels):
    """Fuse an amplified RAW into its well-exposed reference."""
    profile = read_profile(profile_path)
    lighted = load_clean(input_path)
    fused = fuse_to_raw(lighted, profile, stops, levels=levels)
    write_uraw(fused, out_path)
    click.echo(f"wrote {out_path}")


@main.command("ratio-map")
@click.argument("lighted_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("fused_path", type=click.Path(exists=True, dir_okay=False))
@_out_option
@click.option("--epsilon", type=float, default=EPSILON_RATIO, show_default=True)
def cmd_ratio_map(lighted_path, fused_path, out_path, epsilon):
    """Per-channel amplification ratio between a lighted RAW and its fusion."""
    lighted = load_clean(lighted_path)
    fused = load_clean(fused_path)
    ratio = ratio_map(lighted, fused, eps=epsilon)
    write_uraw(lighted.with_planes(ratio.values.astype(np.float32)), out_path)
    click.echo(f"wrote {out_path}")


@main.command("add-noise")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@_profile_option
@_out_option
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--ratio-min", type=float, default=50.0, show_default=True)
@click.option("--ratio-max", type=float, default=300.0, show_default=True)
@click.option(
    "--family",
    type=click.Choice(["full", "pg"]),
    default="full",
    show_default=True,
)
def cmd_add_noise(
    input_path, profile_path, out_path, seed, ratio_min, ratio_max, family
):
    """Attenuate, add physics-based noise, and rescale an amplified RAW."""
    profile = read_profile(profile_path)
    lighted = load_clean(input_path)
    sample = sample_noise_params(
        profile, np.random.default_rng(seed), (ratio_min, ratio_max), family
    )
    noisy = synthesize_noisy(lighted, sample)
    write_uraw(noisy, out_path)
    click.echo(
        f"wrote {out_path} (K={sample.K:.4e} R={sample.R:.2f} "
        f"read={sample.read_sigma:.4e} row={sample.row_sigma:.4e} "
        f"quant={sample.quant_step:.4e} seed={sample.seed})"
    )


@main.command("encode")
@click.argument("ratio_path", type=click.Path(exists=True, dir_okay=False))
@_out_option
@click.option(
    "--amplification",
    "-r",
    type=float,
    required=True,
    help="ratio R the noisy frame was rescaled by",
)
@click.option("--sigma", type=float, default=30.0, show_default=True)
@click.option("--dims", type=int, default=64, show_default=True)
@click.option(
    "--method",
    type=click.Choice(sorted(ENCODERS)),
    default="gaussian",
    show_default=True,
)
def cmd_encode(ratio_path, out_path, amplification, sigma, dims, method):
    """Expand a stored ratio map into a grid encoding tensor."""
    packed = load_clean(ratio_path)
    ratio = RatioMap(values=packed.planes.astype(np.float64), epsilon=EPSILON_RATIO)
    try:
        spec = EncodingSpec(sigma=sigma, dims=dims)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    r = pixel_ratio(ratio, amplification)
    if method == "gaussian":
        tensor = encode(r, spec).tensor
    else:
        tensor = ENCODERS[method](r, spec)
    write_uenc(out_path, tensor, spec, kind=method)
    click.echo(f"wrote {out_path} ({method}, D={spec.dims})")


@main.command("render")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@_profile_option
@_out_option
def cmd_render(input_path, profile_path, out_path):
    """Render a URAW file to an 8-bit PNG or 16-bit PPM."""
    profile = read_profile(profile_path)
    packed = load_clean(input_path)
    rgb = render(packed, profile)
    save_rgb(out_path, rgb.planes)
    click.echo(f"wrote {out_path}")


@main.command("eval")
@click.argument("pred_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("ref_dir", type=click.Path(exists=True, file_okay=False))
@_profile_option
@_out_option
@click.option(
    "--figures/--no-figures",
    "figures",
    default=True,
    show_default=True,
    help="write per-metric charts next to the CSV",
)
def cmd_eval(pred_dir, ref_dir, profile_path, out_path, figures):
    """Compare matching URAW files from two directories."""
    profile = read_profile(profile_path)
    pred_dir = Path(pred_dir)
    ref_dir = Path(ref_dir)
    pred_names = {p.name for p in pred_dir.glob("*.uraw")}
    ref_names = {p.name for p in ref_dir.glob("*.uraw")}
    shared = sorted(pred_names & ref_names)
    for name in sorted(pred_names ^ ref_names):
        click.echo(f"warning: {name} present on one side only, skipped", err=True)
    if not shared:
        click.echo("warning: no matching .uraw pairs found", err=True)
    rows = []
    for name in shared:
        report = evaluate_pair(
            load_clean(pred_dir / name), load_clean(ref_dir / name), profile
        )
        rows.append((name, report))
    write_metrics_csv(out_path, rows)
    written = [Path(out_path)]
    if figures:
        written.extend(write_metric_figures(out_path, rows))
    click.echo(f"evaluated {len(rows)} pairs")
    for path in written:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
