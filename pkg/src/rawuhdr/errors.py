"""Exception hierarchy shared across the toolkit.

Every CLI failure path maps one of these onto a distinct exit code; see
cli.EXIT_CODES for the table.
"""

from __future__ import annotations


class RawUhdrError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(RawUhdrError):
    """Image or tensor dimensions violate a contract (odd mosaic size, shape mismatch)."""


class ProfileError(RawUhdrError):
    """Camera profile is malformed or internally inconsistent."""


class FormatError(RawUhdrError):
    """Serialized container has a bad magic number or malformed header."""


class VersionError(FormatError):
    """Serialized container declares an unsupported format version."""


class TruncatedPayloadError(FormatError):
    """Serialized container ends before its declared payload length."""


class ValueRangeError(RawUhdrError):
    """Numeric argument outside its documented domain (negative signal, non-positive ratio)."""


class ConfigError(RawUhdrError):
    """Dataset or synthesis configuration is malformed."""


class ManifestError(RawUhdrError):
    """Dataset manifest references missing files or fails validation."""
