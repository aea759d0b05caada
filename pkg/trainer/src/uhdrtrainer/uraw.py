"""Reader and writer for the packed flavor of the URAW container.

The trainer exchanges image data with the synthesis toolkit only
through files, so this module reimplements the container layout from
its published description rather than importing the producer's code.

Layout (little-endian, 52-byte header):

    magic     4s   b"URAW"
    version   u16  1
    kind      u8   0 = mosaic u16 payload, 1 = packed float32 payload
    bayer     u8   0 RGGB, 1 BGGR, 2 GRBG, 3 GBRG
    width     u32  mosaic width (twice the packed plane width)
    height    u32  mosaic height
    black     4 x f32
    white     f32
    iso       f32
    exposure  f32
    payload   u64  payload byte count

Only kind 1 is supported here; training operates on normalized planes
and never touches mosaic integer data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_HEADER = struct.Struct("<4sHBBII4ffffQ")
_MAGIC = b"URAW"
_VERSION = 1
_KIND_PACKED = 1

_BAYER_CODES = {"RGGB": 0, "BGGR": 1, "GRBG": 2, "GBRG": 3}
_BAYER_NAMES = {code: name for name, code in _BAYER_CODES.items()}


class UrawError(ValueError):
    """Base for malformed or unsupported container files."""


class UrawFormatError(UrawError):
    """Structurally invalid file: bad magic, kind, or field values."""


class UrawVersionError(UrawError):
    """Container version this reader does not understand."""


class UrawTruncatedError(UrawError):
    """Payload shorter than the byte count promised by the header."""


@dataclass(frozen=True)
class PackedTile:
    """Normalized packed RAW: four half-resolution planes in CFA order."""

    planes: np.ndarray
    bayer_pattern: str
    black_level: tuple[float, float, float, float]
    white_level: float
    iso: float
    exposure_time: float

    def __post_init__(self) -> None:
        planes = np.asarray(self.planes, dtype=np.float32)
        if planes.ndim != 3 or planes.shape[0] != 4:
            raise UrawFormatError(
                f"packed planes must have shape (4, h, w), got {planes.shape}"
            )
        if self.bayer_pattern not in _BAYER_CODES:
            raise UrawFormatError(f"unknown bayer pattern {self.bayer_pattern!r}")
        object.__setattr__(self, "planes", planes)

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]


def read_packed(path: str | Path) -> PackedTile:
    """Load a packed (kind 1) container from disk."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise UrawTruncatedError(f"{path}: file shorter than the fixed header")
    (
        magic,
        version,
        kind,
        bayer,
        width,
        height,
        b0,
        b1,
        b2,
        b3,
        white,
        iso,
        exposure,
        payload_size,
    ) = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise UrawFormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise UrawVersionError(f"{path}: unsupported version {version}")
    if kind != _KIND_PACKED:
        raise UrawFormatError(
            f"{path}: kind {kind} is not a packed container; only packed "
            "float payloads are readable here"
        )
    if bayer not in _BAYER_NAMES:
        raise UrawFormatError(f"{path}: unknown bayer code {bayer}")
    if width % 2 or height % 2 or width == 0 or height == 0:
        raise UrawFormatError(f"{path}: mosaic dimensions {width}x{height} invalid")
    expected = 4 * (height // 2) * (width // 2) * 4
    if payload_size != expected:
        raise UrawFormatError(
            f"{path}: payload size {payload_size} does not match "
            f"dimensions (expected {expected})"
        )
    body = raw[_HEADER.size :]
    if len(body) < payload_size:
        raise UrawTruncatedError(
            f"{path}: payload has {len(body)} bytes, header promised {payload_size}"
        )
    planes = np.frombuffer(body[:payload_size], dtype="<f4").reshape(
        4, height // 2, width // 2
    )
    return PackedTile(
        planes=planes.copy(),
        bayer_pattern=_BAYER_NAMES[bayer],
        black_level=(b0, b1, b2, b3),
        white_level=white,
        iso=iso,
        exposure_time=exposure,
    )


def write_packed(path: str | Path, tile: PackedTile) -> None:
    """Write a packed container readable by this module and the toolkit."""
    planes = np.ascontiguousarray(tile.planes, dtype="<f4")
    payload = planes.tobytes()
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        _KIND_PACKED,
        _BAYER_CODES[tile.bayer_pattern],
        2 * tile.width,
        2 * tile.height,
        *[float(b) for b in tile.black_level],
        float(tile.white_level),
        float(tile.iso),
        float(tile.exposure_time),
        len(payload),
    )
    Path(path).write_bytes(header + payload)
