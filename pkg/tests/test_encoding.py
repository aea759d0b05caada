"""Per-pixel ratio computation and the grid encodings built from it.

Peak constants below are frozen from a 50-digit decimal evaluation of
peak(sigma, r) = 1 / (sqrt(2*pi) * sigma * r) at sigma = 30; the float64
values agree with the decimal ones to the last printed digit.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rawuhdr.encoding import (
    ENCODERS,
    EncodedRatio,
    EncodingSpec,
    encode,
    gaussian_encoding,
    one_hot_encoding,
    pixel_ratio,
    positional_encoding,
    read_uenc,
    upper_bound,
    write_uenc,
)
from rawuhdr.errors import (
    FormatError,
    TruncatedPayloadError,
    ValueRangeError,
    VersionError,
)
from rawuhdr.fusion import RatioMap, ratio_map
from rawuhdr.raw import PackedRaw

PEAK_R1 = 0.01329807601338109
PEAK_R25 = 0.0005319230405352436
PEAK_R60 = 0.00022163460022301814
PEAK_R320 = 4.1556487541815906e-05

SQRT_2PI = math.sqrt(2.0 * math.pi)


def plane(values):
    return np.asarray(values, dtype=np.float64)


class TestEncodingSpec:
    def test_defaults(self):
        spec = EncodingSpec()
        assert spec.sigma == 30.0
        assert spec.dims == 64
        assert (spec.r_lo, spec.r_hi) == (1.0, 320.0)

    def test_grid_endpoints_and_monotonic(self):
        spec = EncodingSpec()
        y = spec.grid
        assert y.shape == (64,)
        assert y[0] == 1.0
        assert y[-1] == 320.0
        assert np.all(np.diff(y) > 0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"sigma": 0.0},
            {"sigma": -1.0},
            {"r_lo": 0.5},
            {"r_lo": 320.0, "r_hi": 320.0},
            {"r_lo": 5.0, "r_hi": 2.0},
            {"dims": 1},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            EncodingSpec(**kwargs)


class TestGaussianEncoding:
    def test_peak_matches_frozen_values_on_grid_points(self):
        # 60 sits on the grid of [20, 320] with 16 points, 25 on [25, 325]
        # with 13; the default grid holds 1 and 320 at its endpoints.
        cases = [
            (EncodingSpec(sigma=30.0, dims=16, r_lo=20.0, r_hi=320.0), 60.0, PEAK_R60),
            (EncodingSpec(sigma=30.0, dims=13, r_lo=25.0, r_hi=325.0), 25.0, PEAK_R25),
            (EncodingSpec(), 1.0, PEAK_R1),
            (EncodingSpec(), 320.0, PEAK_R320),
        ]
        for spec, r, expected in cases:
            enc = gaussian_encoding(plane([[r]]), spec)
            j = int(np.argmin(np.abs(spec.grid - r)))
            assert spec.grid[j] == r
            got = enc[j, 0, 0]
            assert got == pytest.approx(expected, rel=1e-12)

    def test_peak_at_r_lo_equals_upper_bound(self):
        spec = EncodingSpec()
        enc = gaussian_encoding(plane([[1.0]]), spec)
        assert enc[0, 0, 0] == upper_bound(spec)

    def test_positivity_and_upper_bound(self):
        spec = EncodingSpec()
        rng = np.random.default_rng(5)
        r = rng.uniform(0.05, 2000.0, size=(40, 30))
        enc = gaussian_encoding(r, spec)
        assert enc.shape == (64, 40, 30)
        assert np.all(enc > 0)
        assert np.all(enc <= upper_bound(spec))

    def test_argmax_is_nearest_grid_point(self):
        spec = EncodingSpec()
        y = spec.grid
        rng = np.random.default_rng(6)
        parts = [
            y.copy(),
            y[:-1] + 0.5 * np.diff(y) - 0.1,
            y[:-1] + 0.5 * np.diff(y) + 0.1,
            rng.uniform(1.0, 320.0, size=10_000),
        ]
        r = np.concatenate(parts).reshape(1, -1)
        enc = gaussian_encoding(r, spec)
        want = np.argmin(np.abs(r[None, :, :] - y[:, None, None]), axis=0)
        got = np.argmax(enc, axis=0)
        assert np.array_equal(got, want)

    def test_doubling_r_halves_peak_exactly(self):
        spec = EncodingSpec(sigma=30.0, dims=16, r_lo=20.0, r_hi=320.0)
        enc = gaussian_encoding(plane([[40.0, 80.0]]), spec)
        j40 = int(np.argmin(np.abs(spec.grid - 40.0)))
        j80 = int(np.argmin(np.abs(spec.grid - 80.0)))
        assert enc[j80, 0, 1] == 0.5 * enc[j40, 0, 0]

    def test_equal_ratios_give_identical_profiles(self):
        spec = EncodingSpec()
        r = plane([[7.25, 133.0], [7.25, 133.0]])
        enc = gaussian_encoding(r, spec)
        assert np.array_equal(enc[:, 0, 0], enc[:, 1, 0])
        assert np.array_equal(enc[:, 0, 1], enc[:, 1, 1])

    @pytest.mark.parametrize("delta", [1e-3, 0.1, 1.0])
    def test_lipschitz_in_r(self, delta):
        spec = EncodingSpec()
        bound = 1.0 / (SQRT_2PI * spec.sigma**2 * spec.r_lo) + 1.0 / (
            SQRT_2PI * spec.sigma * spec.r_lo**2
        )
        rng = np.random.default_rng(7)
        r = rng.uniform(0.5, 400.0, size=(20, 20))
        a = gaussian_encoding(r, spec)
        b = gaussian_encoding(r + delta, spec)
        assert np.max(np.abs(a - b)) <= delta * bound

    def test_out_of_range_ratios_saturate(self):
        # ratios beyond the grid encode like the nearest endpoint, which
        # keeps every entry under the stated bound
        spec = EncodingSpec()
        enc = gaussian_encoding(plane([[0.25, 5000.0]]), spec)
        lo = gaussian_encoding(plane([[spec.r_lo]]), spec)
        hi = gaussian_encoding(plane([[spec.r_hi]]), spec)
        assert np.array_equal(enc[:, 0, 0], lo[:, 0, 0])
        assert np.array_equal(enc[:, 0, 1], hi[:, 0, 0])

    @pytest.mark.parametrize("bad", [0.0, -3.0])
    def test_rejects_nonpositive_ratio(self, bad):
        with pytest.raises(ValueRangeError):
            gaussian_encoding(plane([[1.0, bad]]), EncodingSpec())

    def test_encode_wraps_validated_tensor(self):
        spec = EncodingSpec()
        enc = encode(plane([[2.0, 100.0]]), spec)
        assert isinstance(enc, EncodedRatio)
        assert enc.tensor.shape == (64, 1, 2)
        assert enc.spec is spec

    def test_encoded_ratio_rejects_bound_violation(self):
        spec = EncodingSpec()
        tensor = np.full((64, 1, 1), 2.0 * upper_bound(spec))
        with pytest.raises(ValueRangeError):
            EncodedRatio(tensor=tensor, spec=spec)

    @settings(max_examples=25, deadline=None)
    @given(
        sigma=st.floats(5.0, 80.0),
        dims=st.integers(2, 96),
        lo=st.floats(1.0, 4.0),
        # width/sigma stays under 30 so the far-tail Gaussian factor cannot
        # underflow to an exact zero and break the positivity invariant
        width=st.floats(10.0, 150.0),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_invariants_hold_for_arbitrary_specs(self, sigma, dims, lo, width, seed):
        spec = EncodingSpec(sigma=sigma, dims=dims, r_lo=lo, r_hi=lo + width)
        rng = np.random.default_rng(seed)
        r = rng.uniform(0.5, lo + 2.0 * width, size=(6, 5))
        enc = gaussian_encoding(r, spec)
        assert np.all(enc > 0)
        assert np.all(enc <= upper_bound(spec))
        want = np.argmin(
            np.abs(np.clip(r, lo, lo + width)[None] - spec.grid[:, None, None]), axis=0
        )
        assert np.array_equal(np.argmax(enc, axis=0), want)


class TestPixelRatio:
    def make_map(self, values):
        return RatioMap(values=np.asarray(values, dtype=np.float64), epsilon=1e-6)

    def test_ratio_equal_to_amplification_gives_unit(self):
        s = self.make_map(np.full((4, 3, 3), 120.0))
        r = pixel_ratio(s, 120.0)
        assert r.shape == (3, 3)
        assert np.all(r == 1.0)

    def test_plain_division(self):
        s = self.make_map(np.full((4, 2, 2), 4.0))
        assert np.all(pixel_ratio(s, 100.0) == 25.0)

    def test_uses_channel_mean(self):
        planes = np.ones((4, 1, 1))
        planes[:, 0, 0] = [1.0, 2.0, 3.0, 6.0]
        s = self.make_map(planes)
        assert pixel_ratio(s, 9.0)[0, 0] == 3.0

    def test_rejects_small_amplification(self):
        s = self.make_map(np.ones((4, 2, 2)))
        with pytest.raises(ValueRangeError):
            pixel_ratio(s, 0.5)

    def test_algebraic_roundtrip_against_ratio_map(self):
        def packed(planes):
            return PackedRaw(
                planes=np.asarray(planes, dtype=np.float32),
                bayer_pattern="RGGB",
                black_level=(0.0,) * 4,
                white_level=1.0,
                iso=100.0,
                exposure_time=0.01,
            )

        rng = np.random.default_rng(8)
        short = rng.uniform(1e-4, 0.2, size=(4, 16, 16)).astype(np.float32)
        gains = rng.uniform(1.0, 64.0, size=(4, 16, 16)).astype(np.float32)
        s = ratio_map(packed(short * gains), packed(short))
        for ratio in (50.0, 100.0, 300.0):
            r = pixel_ratio(s, ratio)
            back = r * s.channel_mean()
            assert np.max(np.abs(back - ratio) / ratio) < 1e-12


class TestBaselineEncoders:
    def test_one_hot_marks_nearest_grid_point(self):
        spec = EncodingSpec()
        rng = np.random.default_rng(9)
        r = rng.uniform(0.5, 400.0, size=(8, 8))
        enc = one_hot_encoding(r, spec)
        assert np.all(np.sum(enc, axis=0) == 1.0)
        assert set(np.unique(enc)) == {0.0, 1.0}
        want = np.argmin(
            np.abs(np.clip(r, 1.0, 320.0)[None] - spec.grid[:, None, None]), axis=0
        )
        assert np.array_equal(np.argmax(enc, axis=0), want)

    def test_positional_values_bounded(self):
        spec = EncodingSpec()
        rng = np.random.default_rng(10)
        r = rng.uniform(1.0, 320.0, size=(8, 8))
        enc = positional_encoding(r, spec)
        assert np.all(np.abs(enc) <= 1.0)

    def test_positional_first_pair_is_unit_frequency(self):
        spec = EncodingSpec()
        r = plane([[1.0, 160.5, 320.0]])
        t = (r - 1.0) / 319.0
        enc = positional_encoding(r, spec)
        assert np.allclose(enc[0], np.sin(np.pi * t), atol=1e-15)
        assert np.allclose(enc[1], np.cos(np.pi * t), atol=1e-15)

    def test_all_encoders_share_output_shape(self):
        spec = EncodingSpec()
        r = np.full((6, 4), 33.0)
        shapes = {name: fn(r, spec).shape for name, fn in ENCODERS.items()}
        assert set(ENCODERS) == {"gaussian", "one-hot", "positional"}
        assert all(s == (64, 6, 4) for s in shapes.values())


class TestUencContainer:
    def roundtrip(self, tmp_path, kind="gaussian"):
        spec = EncodingSpec()
        r = np.random.default_rng(11).uniform(1.0, 320.0, size=(5, 7))
        tensor = ENCODERS[kind](r, spec)
        path = tmp_path / "sample.uenc"
        write_uenc(path, tensor, spec, kind=kind)
        return path, tensor, spec

    def test_roundtrip_preserves_tensor_and_spec(self, tmp_path):
        path, tensor, spec = self.roundtrip(tmp_path)
        got, got_spec, kind = read_uenc(path)
        assert kind == "gaussian"
        assert got.dtype == np.float32
        assert np.array_equal(got, tensor.astype(np.float32))
        assert got_spec == spec

    def test_roundtrip_one_hot(self, tmp_path):
        path, tensor, _ = self.roundtrip(tmp_path, kind="one-hot")
        got, _, kind = read_uenc(path)
        assert kind == "one-hot"
        assert np.array_equal(got, tensor.astype(np.float32))

    def test_rejects_wrong_magic(self, tmp_path):
        path, _, _ = self.roundtrip(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            read_uenc(path)

    def test_rejects_unknown_version(self, tmp_path):
        path, _, _ = self.roundtrip(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[4:6] = (99).to_bytes(2, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(VersionError):
            read_uenc(path)

    def test_rejects_truncated_payload(self, tmp_path):
        path, _, _ = self.roundtrip(tmp_path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-5])
        with pytest.raises(TruncatedPayloadError):
            read_uenc(path)
