"""Bayer mosaic representation, SID-convention packing, and the URAW container.

A mosaic is stored as integer digital numbers; all processing happens on the
packed representation: four half-resolution float32 planes in the fixed
channel order (R, G1, G2, B), normalized by (DN - black) / (white - black).
G1 is the green sharing a row with R, G2 the green sharing a row with B.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionError,
    FormatError,
    ProfileError,
    TruncatedPayloadError,
    VersionError,
)

CHANNEL_NAMES = ("R", "G1", "G2", "B")

# (dy, dx) of each channel inside the 2x2 CFA tile, per pattern
BAYER_OFFSETS = {
    "RGGB": {"R": (0, 0), "G1": (0, 1), "G2": (1, 0), "B": (1, 1)},
    "BGGR": {"R": (1, 1), "G1": (1, 0), "G2": (0, 1), "B": (0, 0)},
    "GRBG": {"R": (0, 1), "G1": (0, 0), "G2": (1, 1), "B": (1, 0)},
    "GBRG": {"R": (1, 0), "G1": (1, 1), "G2": (0, 0), "B": (0, 1)},
}

BAYER_CODES = {"RGGB": 0, "BGGR": 1, "GRBG": 2, "GBRG": 3}
BAYER_FROM_CODE = {v: k for k, v in BAYER_CODES.items()}

URAW_MAGIC = b"URAW"
URAW_VERSION = 1
KIND_MOSAIC = 0
KIND_PACKED = 1

# magic, version, kind, bayer, width, height, black x4, white, iso, t_exp, payload len
_HEADER = struct.Struct("<4sHBBII4ffffQ")
HEADER_SIZE = _HEADER.size


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.flags.writeable = False
    return out


def _check_levels(black_level: np.ndarray, white_level: float) -> None:
    if not np.all(black_level < white_level):
        raise ProfileError(
            f"black level {black_level.tolist()} must be below white level {white_level}"
        )


@dataclass(frozen=True)
class RawImage:
    """Integer Bayer mosaic with its DN calibration.

    `warnings` collects non-fatal events (e.g. clipping during unpack).
    """

    data: np.ndarray
    bayer_pattern: str
    black_level: tuple[float, float, float, float]
    white_level: float
    iso: float
    exposure_time: float
    warnings: tuple[str, ...] = ()
    width: int = field(init=False)
    height: int = field(init=False)

    def __post_init__(self):
        if self.bayer_pattern not in BAYER_OFFSETS:
            raise FormatError(f"unknown bayer pattern {self.bayer_pattern!r}")
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise DimensionError(f"mosaic must be 2-D, got shape {data.shape}")
        h, w = data.shape
        if h % 2 or w % 2:
            raise DimensionError(f"mosaic dimensions must be even, got {h}x{w}")
        if not np.issubdtype(data.dtype, np.integer):
            raise FormatError(f"mosaic dtype must be integer, got {data.dtype}")
        black = np.asarray(self.black_level, dtype=np.float32)
        if black.shape != (4,):
            raise ProfileError("black_level must hold one value per CFA channel")
        _check_levels(black, self.white_level)
        if np.max(data) > self.white_level:
            raise ProfileError(
                f"mosaic contains DN above white level {self.white_level}"
            )
        object.__setattr__(self, "data", _freeze(data.astype(np.uint16)))
        object.__setattr__(self, "black_level", _freeze(black))
        object.__setattr__(self, "height", h)
        object.__setattr__(self, "width", w)


@dataclass(frozen=True)
class PackedRaw:
    """Four normalized half-resolution planes in (R, G1, G2, B) order.

    Values are >= 0 after packing a mosaic; synthetic pipeline stages
    (highlight amplification, noise) may push them above 1 or below 0,
    clipping is always an explicit operation.
    """

    planes: np.ndarray
    bayer_pattern: str
    black_level: tuple[float, float, float, float]
    white_level: float
    iso: float
    exposure_time: float
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.bayer_pattern not in BAYER_OFFSETS:
            raise FormatError(f"unknown bayer pattern {self.bayer_pattern!r}")
        planes = np.asarray(self.planes, dtype=np.float32)
        if planes.ndim != 3 or planes.shape[0] != 4:
            raise DimensionError(
                f"packed planes must have shape [4, H/2, W/2], got {planes.shape}"
            )
        black = np.asarray(self.black_level, dtype=np.float32)
        if black.shape != (4,):
            raise ProfileError("black_level must hold one value per CFA channel")
        _check_levels(black, self.white_level)
        object.__setattr__(self, "planes", _freeze(planes))
        object.__setattr__(self, "black_level", _freeze(black))

    @property
    def plane_shape(self) -> tuple[int, int]:
        return self.planes.shape[1], self.planes.shape[2]

    def with_planes(self, planes: np.ndarray, extra_warning: str | None = None) -> "PackedRaw":
        warnings = self.warnings + ((extra_warning,) if extra_warning else ())
        return PackedRaw(
            planes=planes,
            bayer_pattern=self.bayer_pattern,
            black_level=tuple(np.asarray(self.black_level, dtype=float)),
            white_level=self.white_level,
            iso=self.iso,
            exposure_time=self.exposure_time,
            warnings=warnings,
        )


def pack(raw: RawImage) -> PackedRaw:
    """Split a mosaic into normalized (R, G1, G2, B) planes.

    DN below the black level clamp to 0 so packed values are non-negative.
    """
    if raw.height % 2 or raw.width % 2:
        raise DimensionError("mosaic dimensions must be even")
    _check_levels(np.asarray(raw.black_level), raw.white_level)
    offsets = BAYER_OFFSETS[raw.bayer_pattern]
    data = raw.data.astype(np.float32)
    planes = np.empty((4, raw.height // 2, raw.width // 2), dtype=np.float32)
    for c, name in enumerate(CHANNEL_NAMES):
        dy, dx = offsets[name]
        black = raw.black_level[c]
        site = data[dy::2, dx::2]
        planes[c] = np.maximum(site - black, 0.0) / np.float32(raw.white_level - black)
    return PackedRaw(
        planes=planes,
        bayer_pattern=raw.bayer_pattern,
        black_level=tuple(np.asarray(raw.black_level, dtype=float)),
        white_level=raw.white_level,
        iso=raw.iso,
        exposure_time=raw.exposure_time,
        warnings=raw.warnings,
    )


def unpack(packed: PackedRaw) -> RawImage:
    """Reassemble the integer mosaic from normalized planes.

    Values above 1 clamp to the white level; the clip is recorded as a
    warning on the returned image rather than raised.
    """
    offsets = BAYER_OFFSETS[packed.bayer_pattern]
    h2, w2 = packed.plane_shape
    data = np.zeros((2 * h2, 2 * w2), dtype=np.float64)
    clipped = 0
    for c, name in enumerate(CHANNEL_NAMES):
        dy, dx = offsets[name]
        black = float(packed.black_level[c])
        plane = packed.planes[c].astype(np.float64)
        clipped += int(np.count_nonzero(plane > 1.0))
        dn = np.rint(plane * (packed.white_level - black) + black)
        data[dy::2, dx::2] = np.clip(dn, 0.0, packed.white_level)
    warnings = packed.warnings
    if clipped:
        warnings = warnings + (f"clipped {clipped} values above white level",)
    return RawImage(
        data=data.astype(np.uint16),
        bayer_pattern=packed.bayer_pattern,
        black_level=tuple(np.asarray(packed.black_level, dtype=float)),
        white_level=packed.white_level,
        iso=packed.iso,
        exposure_time=packed.exposure_time,
        warnings=warnings,
    )


def _pack_header(image: RawImage | PackedRaw, kind: int, payload_len: int) -> bytes:
    if isinstance(image, RawImage):
        width, height = image.width, image.height
    else:
        h2, w2 = image.plane_shape
        width, height = 2 * w2, 2 * h2
    black = np.asarray(image.black_level, dtype=np.float32)
    return _HEADER.pack(
        URAW_MAGIC,
        URAW_VERSION,
        kind,
        BAYER_CODES[image.bayer_pattern],
        width,
        height,
        *[float(b) for b in black],
        float(image.white_level),
        float(image.iso),
        float(image.exposure_time),
        payload_len,
    )


def write_uraw(image: RawImage | PackedRaw, path) -> None:
    """Serialize a mosaic (kind 0, u16) or packed planes (kind 1, f32)."""
    if isinstance(image, RawImage):
        payload = np.ascontiguousarray(image.data, dtype="<u2").tobytes()
        header = _pack_header(image, KIND_MOSAIC, len(payload))
    elif isinstance(image, PackedRaw):
        payload = np.ascontiguousarray(image.planes, dtype="<f4").tobytes()
        header = _pack_header(image, KIND_PACKED, len(payload))
    else:
        raise FormatError(f"cannot serialize {type(image).__name__}")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_uraw(path) -> RawImage | PackedRaw:
    """Parse a URAW file; raises a distinct error per failure mode."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER_SIZE:
        if blob[:4] != URAW_MAGIC:
            raise FormatError(f"{path}: not a URAW file")
        raise TruncatedPayloadError(f"{path}: header truncated")
    (
        magic,
        version,
        kind,
        bayer_code,
        width,
        height,
        b0,
        b1,
        b2,
        b3,
        white,
        iso,
        t_exp,
        payload_len,
    ) = _HEADER.unpack_from(blob)
    if magic != URAW_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != URAW_VERSION:
        raise VersionError(f"{path}: unsupported version {version}")
    if bayer_code not in BAYER_FROM_CODE:
        raise FormatError(f"{path}: unknown bayer code {bayer_code}")
    payload = blob[HEADER_SIZE : HEADER_SIZE + payload_len]
    if len(payload) < payload_len:
        raise TruncatedPayloadError(
            f"{path}: payload holds {len(payload)} of {payload_len} declared bytes"
        )
    bayer = BAYER_FROM_CODE[bayer_code]
    black = (b0, b1, b2, b3)
    if kind == KIND_MOSAIC:
        expect = width * height * 2
        if payload_len != expect:
            raise FormatError(
                f"{path}: mosaic payload must be {expect} bytes, header says {payload_len}"
            )
        data = np.frombuffer(payload, dtype="<u2").reshape(height, width)
        return RawImage(
            data=data,
            bayer_pattern=bayer,
            black_level=black,
            white_level=white,
            iso=iso,
            exposure_time=t_exp,
        )
    if kind == KIND_PACKED:
        expect = 4 * (height // 2) * (width // 2) * 4
        if payload_len != expect:
            raise FormatError(
                f"{path}: packed payload must be {expect} bytes, header says {payload_len}"
            )
        planes = np.frombuffer(payload, dtype="<f4").reshape(4, height // 2, width // 2)
        return PackedRaw(
            planes=planes,
            bayer_pattern=bayer,
            black_level=black,
            white_level=white,
            iso=iso,
            exposure_time=t_exp,
        )
    raise FormatError(f"{path}: unknown payload kind {kind}")


def read_uraw_header(path) -> dict:
    """Header fields only; used for cheap manifest validation."""
    with open(path, "rb") as fh:
        blob = fh.read(HEADER_SIZE)
    if len(blob) < HEADER_SIZE:
        raise TruncatedPayloadError(f"{path}: header truncated")
    fields = _HEADER.unpack(blob)
    if fields[0] != URAW_MAGIC:
        raise FormatError(f"{path}: bad magic {fields[0]!r}")
    if fields[1] != URAW_VERSION:
        raise VersionError(f"{path}: unsupported version {fields[1]}")
    return {
        "kind": fields[2],
        "bayer": BAYER_FROM_CODE.get(fields[3]),
        "width": fields[4],
        "height": fields[5],
        "black_level": fields[6:10],
        "white_level": fields[10],
        "iso": fields[11],
        "exposure_time": fields[12],
        "payload_len": fields[13],
    }
