"""Evaluation output: CSV rows, per-metric figures, and image export."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from PIL import Image

from .errors import ConfigError
from .metrics import REPORT_FIELDS, MetricReport


def write_metrics_csv(path, rows: list[tuple[str, MetricReport]]) -> Path:
    """One row per evaluated pair; floats at full precision, inf/nan literal."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("name",) + REPORT_FIELDS)
        for name, report in rows:
            writer.writerow([name] + [repr(getattr(report, f)) for f in REPORT_FIELDS])
    return path


def write_metric_figures(csv_path, rows: list[tuple[str, MetricReport]]) -> list[Path]:
    """One bar chart per metric, saved next to the CSV as <stem>_<metric>.png.

    Non-finite values (PSNR's infinity sentinel, undefined relative L1) are
    left out of the bars and counted in the title instead.
    """
    stem = Path(csv_path).with_suffix("")
    names = [name for name, _ in rows]
    positions = np.arange(len(names))
    paths = []
    for field in REPORT_FIELDS:
        values = np.array(
            [getattr(report, field) for _, report in rows], dtype=np.float64
        )
        finite = np.isfinite(values)
        fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(names) + 2.0), 3.0))
        ax.bar(positions[finite], values[finite])
        ax.set_xticks(positions)
        ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
        omitted = int(np.count_nonzero(~finite))
        title = field if not omitted else f"{field} ({omitted} non-finite omitted)"
        ax.set_title(title)
        ax.set_ylabel(field)
        fig.tight_layout()
        out = Path(f"{stem}_{field}.png")
        fig.savefig(out, dpi=110)
        plt.close(fig)
        paths.append(out)
    return paths


def save_rgb(path, planes) -> Path:
    """Write [3, h, w] planes in [0,1] as 8-bit PNG or 16-bit binary PPM."""
    path = Path(path)
    arr = np.clip(np.asarray(planes, dtype=np.float64), 0.0, 1.0)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ConfigError(f"expected [3, h, w] planes, got shape {arr.shape}")
    hwc = np.moveaxis(arr, 0, -1)
    suffix = path.suffix.lower()
    if suffix == ".png":
        data = np.round(hwc * 255.0).astype(np.uint8)
        Image.fromarray(data, mode="RGB").save(path)
    elif suffix == ".ppm":
        data = np.round(hwc * 65535.0).astype(np.uint16)
        with open(path, "wb") as fh:
            fh.write(b"P6\n%d %d\n65535\n" % (data.shape[1], data.shape[0]))
            fh.write(data.astype(">u2").tobytes())
    else:
        raise ConfigError(f"unsupported image format {path.suffix!r}")
    return path
