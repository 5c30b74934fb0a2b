import math
import random

import numpy as np
import pytest

from corax.bundles import rasterize_regions
from corax.errors import (
    EmptyInputError,
    ParameterError,
    StateError,
    UndefinedMetricError,
)
from corax.gaze import BinaryMask, HeatmapFrame, binarize
from corax.labeling import Abnormality
from corax.metrics import (
    ConfusionCounts,
    UsefulnessSample,
    ci_multiplier,
    confidence_interval,
    empirical_cdf,
    exceedance_from_cdf,
    oder,
    pecr,
    referral_usefulness,
    spatial_iou,
    total_usefulness,
)
from corax.referral import CaseAnalysis, Referral, ReferralStatus, RoiMode
from oracles import (
    count_exceeding,
    mask_iou_pixelcount,
    normal_quantile_bisection,
    t_quantile_bisection,
)


def square_mask(x0, y0, side, size=20):
    m = np.zeros((size, size), dtype=bool)
    m[y0:y0 + side, x0:x0 + side] = True
    return BinaryMask(size, size, m)


class TestRates:
    def test_pecr_perfect(self):
        assert pecr(ConfusionCounts(tr=10, fd=0)) == 100.0

    def test_pecr_partial(self):
        assert pecr(ConfusionCounts(tr=14, fd=5)) == pytest.approx(100 * 14 / 19)

    def test_pecr_zero(self):
        assert pecr(ConfusionCounts(tr=0, fd=7)) == 0.0

    def test_pecr_undefined(self):
        with pytest.raises(UndefinedMetricError):
            pecr(ConfusionCounts())

    def test_oder_values(self):
        assert oder(ConfusionCounts(fr=1, td=259)) == pytest.approx(100 / 260)
        assert oder(ConfusionCounts(fr=0, td=100)) == 0.0
        assert oder(ConfusionCounts(fr=2, td=259)) == pytest.approx(200 / 261)

    def test_oder_undefined(self):
        with pytest.raises(UndefinedMetricError):
            oder(ConfusionCounts(tr=5))

    def test_rates_scale_free(self):
        c1 = ConfusionCounts(tr=3, fd=2, fr=1, td=10)
        c5 = ConfusionCounts(tr=15, fd=10, fr=5, td=50)
        assert pecr(c1) == pecr(c5)
        assert oder(c1) == oder(c5)


class TestSpatialIou:
    def test_identity(self):
        m = square_mask(2, 2, 5)
        assert spatial_iou(m, m) == 1.0

    def test_disjoint(self):
        assert spatial_iou(square_mask(0, 0, 4), square_mask(10, 10, 4)) == 0.0

    def test_half_shifted_square(self):
        a = square_mask(0, 0, 10)
        b = square_mask(5, 0, 10)
        assert spatial_iou(a, b) == pytest.approx(50 / 150)

    def test_matches_pixel_count_oracle(self, rng):
        for _ in range(20):
            a = BinaryMask(16, 16, rng.random((16, 16)) > 0.5)
            b = BinaryMask(16, 16, rng.random((16, 16)) > 0.5)
            assert spatial_iou(a, b) == pytest.approx(
                mask_iou_pixelcount(a.mask, b.mask)
            )

    def test_dimension_mismatch(self):
        with pytest.raises(ParameterError):
            spatial_iou(square_mask(0, 0, 4, size=20), square_mask(0, 0, 4, size=24))

    def test_both_empty_undefined(self):
        e = BinaryMask(4, 4, np.zeros((4, 4), dtype=bool))
        with pytest.raises(UndefinedMetricError):
            spatial_iou(e, e)


def make_referral(status, roi_values=None):
    if roi_values is None:
        roi_values = np.zeros((20, 20))
        roi_values[4:10, 4:10] = 1.0
    roi = HeatmapFrame(20, 20, roi_values)
    return Referral(
        referral_id="c--edema", case_id="c", abnormality=Abnormality.EDEMA,
        interval=(0.0, 100.0), roi=roi, roi_mode=RoiMode.MEAN_IMAGE, status=status,
    )


class TestReferralUsefulness:
    def test_rejected_is_exactly_zero(self):
        s = referral_usefulness(make_referral(ReferralStatus.REJECTED), square_mask(4, 4, 6))
        assert s.value == 0.0

    def test_accepted_equals_spatial_iou_bit_for_bit(self):
        ref = make_referral(ReferralStatus.ACCEPTED)
        truth = square_mask(6, 6, 6)
        s = referral_usefulness(ref, truth, threshold_frac=0.5)
        assert s.value == spatial_iou(binarize(ref.roi, 0.5), truth)

    def test_pending_rejected_state(self):
        with pytest.raises(StateError):
            referral_usefulness(make_referral(ReferralStatus.PENDING), square_mask(0, 0, 4))

    def test_missing_truth_region_scores_zero(self):
        empty = BinaryMask(20, 20, np.zeros((20, 20), dtype=bool))
        s = referral_usefulness(make_referral(ReferralStatus.ACCEPTED), empty)
        assert s.value == 0.0


class TestTotalUsefulness:
    def analysis(self, referrals):
        return CaseAnalysis(case_id="c", set_a=set(), set_b=set(), grounded=[],
                            referrals=referrals)

    def test_correct_deferral(self):
        s = total_usefulness(self.analysis([]), set(), {})
        assert (s.kind, s.value) == ("deferral", 1.0)

    def test_missed_deferral(self):
        s = total_usefulness(self.analysis([]), {Abnormality.EDEMA}, {})
        assert (s.kind, s.value) == ("deferral", 0.0)

    def test_single_referral_case_uses_its_score(self):
        ref = make_referral(ReferralStatus.ACCEPTED)
        s = total_usefulness(self.analysis([ref]), {Abnormality.EDEMA}, {ref.referral_id: 0.6})
        assert (s.kind, s.value) == ("referral", 0.6)

    def test_multi_referral_mean(self):
        r1 = make_referral(ReferralStatus.ACCEPTED)
        r2 = make_referral(ReferralStatus.REJECTED)
        r2.referral_id = "c--cardiomegaly"
        s = total_usefulness(
            self.analysis([r1, r2]), {Abnormality.EDEMA},
            {r1.referral_id: 0.8, r2.referral_id: 0.0},
        )
        assert abs(s.value - 0.4) < 1e-12

    def test_pending_blocks_scoring(self):
        ref = make_referral(ReferralStatus.PENDING)
        with pytest.raises(StateError):
            total_usefulness(self.analysis([ref]), set(), {})


class TestConfidenceInterval:
    def test_constant_samples_zero_width(self):
        mean, lo, hi = confidence_interval([0.5] * 12)
        assert mean == lo == hi == 0.5

    def test_n10_uses_t_multiplier(self):
        assert ci_multiplier(10) == pytest.approx(2.262, abs=1e-3)

    def test_large_n_half_width(self):
        rng = random.Random(1)
        samples = [rng.random() for _ in range(100)]
        mean = sum(samples) / 100
        sd = math.sqrt(sum((x - mean) ** 2 for x in samples) / 99)
        _, lo, hi = confidence_interval(samples)
        assert hi - mean == pytest.approx(1.959964 * sd / 10, rel=1e-9)

    def test_boundary_rule_at_n_30_31(self):
        assert ci_multiplier(31) == 1.959964
        assert ci_multiplier(30) == pytest.approx(2.045, abs=1e-3)

    def test_t_multipliers_match_inverse_cdf_oracle(self):
        for n in range(3, 31):
            oracle = t_quantile_bisection(0.975, n - 1)
            assert abs(ci_multiplier(n) - oracle) < 1e-3, n

    def test_pinned_z_matches_oracle(self):
        assert abs(1.959964 - normal_quantile_bisection(0.975)) < 1e-5

    def test_small_n_undefined(self):
        with pytest.raises(UndefinedMetricError):
            confidence_interval([0.5])


class TestEmpiricalCdf:
    def test_simple_ranks(self):
        points = dict(empirical_cdf([0.0, 0.5, 1.0]))
        assert points[0.5] == pytest.approx(2 / 3)
        assert points[1.0] == 1.0

    def test_degenerate_single_step(self):
        assert empirical_cdf([0.7, 0.7, 0.7]) == [(0.7, 1.0)]

    def test_nondecreasing_and_ends_at_one(self, rng):
        samples = list(rng.random(200))
        points = empirical_cdf(samples)
        fs = [f for _, f in points]
        assert fs == sorted(fs)
        assert fs[-1] == 1.0

    def test_exceedance_matches_brute_force(self, rng):
        samples = list(np.round(rng.random(300), 2))
        points = empirical_cdf(samples)
        for _ in range(50):
            thr = float(rng.uniform(-0.1, 1.1))
            assert exceedance_from_cdf(points, len(samples), thr) == count_exceeding(
                samples, thr
            )

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            empirical_cdf([])


def test_usefulness_sample_bounds():
    with pytest.raises(ParameterError):
        UsefulnessSample("x", "referral", 1.5)


def test_rasterized_ellipse_matches_inclusion_oracle():
    from corax.bundles import EllipseShape, Region

    shape = EllipseShape(cx=0.5, cy=0.5, rx=0.25, ry=0.15)
    mask = rasterize_regions(
        [Region(abnormality=Abnormality.EDEMA, shape=shape)], 40, 40
    )
    for py in range(40):
        for px in range(40):
            x, y = (px + 0.5) / 40, (py + 0.5) / 40
            assert mask.mask[py, px] == shape.contains(x, y)
