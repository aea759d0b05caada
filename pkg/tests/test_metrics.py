"""Evaluation metrics: weighted and plain L1, PSNR, SSIM, exposure alignment.

The SSIM oracle below is a direct windowed-loop evaluation of the local
statistics formula, written independently of the vectorized implementation.
"""

import math

import numpy as np
import pytest

from rawuhdr.errors import DimensionError, ValueRangeError
from rawuhdr.fusion import RatioMap
from rawuhdr.isp import render
from rawuhdr.metrics import (
    MetricReport,
    evaluate_pair,
    exposure_align,
    l1,
    psnr,
    ssim,
    weighted_l1,
)
from rawuhdr.profile import CameraProfile, NoiseParams
from rawuhdr.raw import PackedRaw

WEIGHTED_L1_4_2 = 2.0 / 4.01  # |4 - 2| / (4 + 0.01) at every pixel


def identity_profile():
    return CameraProfile(
        name="identity",
        wb_gains=(1.0, 1.0, 1.0),
        ccm=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
        gamma="srgb",
        noise=NoiseParams(
            log_k_min=-11.5,
            log_k_max=-9.0,
            read_slope=0.85,
            read_intercept=0.4,
            read_scatter=0.1,
            row_sigma_ratio=0.2,
            quant_step=6.3e-05,
        ),
    )


def packed(planes):
    return PackedRaw(
        planes=np.asarray(planes, dtype=np.float32),
        bayer_pattern="RGGB",
        black_level=(0.0,) * 4,
        white_level=1.0,
        iso=100.0,
        exposure_time=0.01,
    )


def ratio_of(values):
    return RatioMap(values=np.asarray(values, dtype=np.float64), epsilon=1e-6)


class TestWeightedL1:
    def test_equal_inputs_give_zero(self):
        s = ratio_of(np.full((4, 3, 3), 7.0))
        assert weighted_l1(s, s, eps=1e-2) == 0.0

    def test_scalar_oracle(self):
        s = ratio_of(np.full((4, 2, 2), 4.0))
        st = ratio_of(np.full((4, 2, 2), 2.0))
        got = weighted_l1(s, st, eps=0.01)
        assert got == pytest.approx(WEIGHTED_L1_4_2, rel=1e-12)

    def test_accepts_plain_arrays(self):
        a = np.full((2, 2), 4.0)
        b = np.full((2, 2), 2.0)
        assert weighted_l1(a, b, eps=0.01) == pytest.approx(
            WEIGHTED_L1_4_2, rel=1e-12
        )

    def test_joint_scaling_invariance_at_zero_eps(self):
        rng = np.random.default_rng(20)
        s = rng.uniform(0.5, 50.0, size=(4, 8, 8))
        st = s * rng.uniform(0.8, 1.2, size=s.shape)
        base = weighted_l1(s, st, eps=0.0)
        # powers of two scale without rounding, so equality is exact
        assert weighted_l1(4.0 * s, 4.0 * st, eps=0.0) == base
        assert weighted_l1(3.0 * s, 3.0 * st, eps=0.0) == pytest.approx(
            base, rel=1e-12
        )

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            weighted_l1(np.ones((2, 2)), np.ones((3, 3)), eps=0.01)

    def test_zero_denominator_rejected(self):
        a = np.array([[0.0, 1.0]])
        b = np.array([[0.5, 1.0]])
        with pytest.raises(ValueRangeError):
            weighted_l1(a, b, eps=0.0)

    def test_nonnegative(self):
        rng = np.random.default_rng(21)
        a = rng.uniform(0.1, 10.0, size=(5, 5))
        b = rng.uniform(0.1, 10.0, size=(5, 5))
        assert weighted_l1(a, b, eps=0.01) >= 0.0


class TestL1:
    def test_equal_inputs_give_zero(self):
        a = np.random.default_rng(22).uniform(size=(4, 6, 6))
        assert l1(a, a) == 0.0

    def test_constant_offset(self):
        a = np.full((3, 3), 0.5)
        assert l1(a, a + 0.25) == 0.25

    def test_matches_brute_force(self):
        rng = np.random.default_rng(23)
        a = rng.uniform(size=(4, 7, 5))
        b = rng.uniform(size=(4, 7, 5))
        brute = math.fsum(abs(float(x) - float(y)) for x, y in zip(a.flat, b.flat))
        brute /= a.size
        assert l1(a, b) == pytest.approx(brute, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            l1(np.ones((2, 2)), np.ones((2, 3)))


class TestPsnr:
    def test_uniform_difference_is_twenty_db(self):
        a = np.full((8, 8), 0.4)
        assert psnr(a, a + 0.1) == pytest.approx(20.0, rel=1e-12)

    def test_mse_oracle(self):
        # MSE 0.01 with peak 1 gives 10*log10(1/0.01) = 20 dB
        a = np.zeros((4, 4))
        b = np.full((4, 4), 0.1)
        assert psnr(a, b, peak=1.0) == pytest.approx(20.0, rel=1e-12)

    def test_identical_inputs_are_infinite(self):
        a = np.random.default_rng(24).uniform(size=(6, 6))
        assert math.isinf(psnr(a, a))

    def test_symmetry(self):
        rng = np.random.default_rng(25)
        a = rng.uniform(size=(5, 5))
        b = rng.uniform(size=(5, 5))
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            psnr(np.ones((2, 2)), np.ones((4, 4)))


def reference_ssim(a, b, window=11, sigma=1.5, k1=0.01, k2=0.03, peak=1.0):
    offsets = np.arange(window) - (window - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma**2))
    g = g / g.sum()
    win = np.outer(g, g)
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    h, w = a.shape
    vals = []
    for i in range(h - window + 1):
        for j in range(w - window + 1):
            pa = a[i : i + window, j : j + window]
            pb = b[i : i + window, j : j + window]
            mu_a = np.sum(win * pa)
            mu_b = np.sum(win * pb)
            var_a = np.sum(win * pa * pa) - mu_a * mu_a
            var_b = np.sum(win * pb * pb) - mu_b * mu_b
            cov = np.sum(win * pa * pb) - mu_a * mu_b
            vals.append(
                ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
            )
    return float(np.mean(vals))


class TestSsim:
    def test_identical_inputs_give_one(self):
        a = np.random.default_rng(26).uniform(size=(16, 16))
        assert ssim(a, a) == 1.0

    def test_constant_pair_reduces_to_luminance_term(self):
        a = np.full((16, 16), 0.3)
        b = np.full((16, 16), 0.5)
        c1 = 0.01**2
        want = (2.0 * 0.3 * 0.5 + c1) / (0.3**2 + 0.5**2 + c1)
        got = ssim(a, b)
        assert got < 1.0
        assert got == pytest.approx(want, rel=1e-9)

    def test_matches_reference_loop(self):
        rng = np.random.default_rng(27)
        a = rng.uniform(size=(16, 16))
        b = np.clip(a + rng.normal(scale=0.08, size=a.shape), 0.0, 1.0)
        assert ssim(a, b) == pytest.approx(reference_ssim(a, b), abs=1e-6)

    def test_multichannel_averages_planes(self):
        rng = np.random.default_rng(28)
        a = rng.uniform(size=(3, 16, 16))
        b = rng.uniform(size=(3, 16, 16))
        per = [ssim(a[c], b[c]) for c in range(3)]
        assert ssim(a, b) == pytest.approx(float(np.mean(per)), rel=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(29)
        a = rng.uniform(size=(14, 14))
        b = rng.uniform(size=(14, 14))
        assert ssim(a, b) == ssim(b, a)

    def test_bounded_above_by_one(self):
        rng = np.random.default_rng(30)
        a = rng.uniform(size=(20, 20))
        b = rng.uniform(size=(20, 20))
        assert ssim(a, b) <= 1.0

    def test_image_smaller_than_window_rejected(self):
        with pytest.raises(DimensionError):
            ssim(np.ones((8, 8)), np.ones((8, 8)), window=11)


class TestExposureAlign:
    def test_half_exposure_recovers_scale_two(self):
        rng = np.random.default_rng(31)
        ref = rng.uniform(0.1, 1.0, size=(4, 8, 8))
        aligned, scale = exposure_align(0.5 * ref, ref)
        assert scale == 2.0
        assert np.max(np.abs(aligned - ref)) == 0.0

    def test_identical_inputs_give_unit_scale(self):
        a = np.random.default_rng(32).uniform(0.1, 1.0, size=(6, 6))
        _, scale = exposure_align(a, a)
        assert scale == 1.0

    def test_matches_brute_force_line_search(self):
        rng = np.random.default_rng(33)
        pred = rng.uniform(0.05, 0.8, size=(4, 4, 4))
        ref = np.clip(1.7 * pred + rng.normal(scale=0.05, size=pred.shape), 0.0, None)
        _, scale = exposure_align(pred, ref)

        def residual(c):
            return np.sum((c * pred[None] - ref[None]) ** 2, axis=(1, 2, 3))

        lo, hi = 0.1, 10.0
        for _ in range(4):
            grid = np.linspace(lo, hi, 2001)
            best = grid[int(np.argmin(residual(grid[:, None, None, None])))]
            step = (hi - lo) / 2000.0
            lo, hi = best - step, best + step
        assert scale == pytest.approx(best, abs=1e-6)

    def test_idempotent(self):
        rng = np.random.default_rng(34)
        pred = rng.uniform(0.05, 0.8, size=(5, 5))
        ref = rng.uniform(0.05, 0.8, size=(5, 5))
        aligned, _ = exposure_align(pred, ref)
        _, again = exposure_align(aligned, ref)
        assert abs(again - 1.0) < 1e-9

    def test_all_zero_prediction_rejected(self):
        with pytest.raises(ValueRangeError):
            exposure_align(np.zeros((4, 4)), np.ones((4, 4)))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            exposure_align(np.ones((2, 2)), np.ones((3, 3)))

    def test_per_channel_recovers_distinct_scales(self):
        rng = np.random.default_rng(35)
        ref = rng.uniform(0.1, 1.0, size=(4, 8, 8))
        factors = np.array([2.0, 4.0, 0.5, 8.0])[:, None, None]
        aligned, scale = exposure_align(ref / factors, ref, per_channel=True)
        assert scale.shape == (4, 1, 1)
        assert np.array_equal(scale[:, 0, 0], factors[:, 0, 0])
        assert np.max(np.abs(aligned - ref)) == 0.0


class TestEvaluatePair:
    def test_identical_pair(self):
        rng = np.random.default_rng(36)
        ref = packed(rng.uniform(0.05, 0.9, size=(4, 16, 16)))
        report = evaluate_pair(ref, ref, identity_profile())
        assert math.isinf(report.psnr)
        assert report.ssim == 1.0
        assert report.l1 == 0.0
        assert report.weighted_l1 == 0.0
        assert report.relative_l1 == 0.0
        assert report.align_scale == 1.0

    def test_half_exposure_pair_aligns_to_identity(self):
        rng = np.random.default_rng(37)
        ref = packed(rng.uniform(0.05, 0.9, size=(4, 16, 16)))
        pred = ref.with_planes(ref.planes * np.float32(0.5))
        report = evaluate_pair(pred, ref, identity_profile())
        assert report.align_scale == 2.0
        assert math.isinf(report.psnr)
        assert report.ssim == 1.0

    def test_zero_reference_pixels_make_relative_l1_undefined(self):
        planes = np.full((4, 16, 16), 0.5, dtype=np.float32)
        planes[0, 0, 0] = 0.0
        ref = packed(planes)
        pred = ref.with_planes(planes * np.float32(0.9))
        report = evaluate_pair(pred, ref, identity_profile())
        assert math.isnan(report.relative_l1)
        assert report.weighted_l1 > 0.0

    def test_report_invariants_for_in_range_pair(self):
        rng = np.random.default_rng(38)
        ref = packed(rng.uniform(0.05, 0.9, size=(4, 16, 16)))
        noisy = np.clip(
            ref.planes + rng.normal(scale=0.03, size=ref.planes.shape), 0.0, 1.0
        )
        pred = ref.with_planes(noisy.astype(np.float32))
        report = evaluate_pair(pred, ref, identity_profile())
        assert report.psnr >= 0.0
        assert report.ssim <= 1.0
        assert report.weighted_l1 >= 0.0
        assert report.l1 >= 0.0
