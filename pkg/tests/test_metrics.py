import numpy as np
import pytest

from protoens import (
    ConfusionCounts,
    DenseMask,
    ShapeMismatchError,
    accumulate,
    format_improvement,
    iou,
    miou,
    relative_improvement,
)
from protoens.oracle import oracle_iou

from helpers import rand_mask


def _mask(values):
    return DenseMask(np.asarray(values, dtype=np.uint8))


class TestAccumulate:
    def test_perfect_prediction(self):
        rng = np.random.default_rng(0)
        m = rand_mask(rng, 8, 8, 3)
        counts = accumulate(ConfusionCounts(), m, m, [1, 2, 3])
        for c in (1, 2, 3):
            tp, fp, fn = counts.counts(c)
            assert fp == 0 and fn == 0

    def test_hand_count(self):
        pred = _mask([[1, 1], [0, 0]])
        gt = _mask([[1, 0], [0, 0]])
        counts = accumulate(ConfusionCounts(), pred, gt, [1])
        assert counts.counts(1) == (1, 1, 0)

    def test_all_ignore_changes_nothing(self):
        pred = _mask([[1, 1], [1, 1]])
        gt = _mask([[255, 255], [255, 255]])
        counts = accumulate(ConfusionCounts(), pred, gt, [1])
        assert counts.counts(1) == (0, 0, 0)

    def test_dim_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            accumulate(ConfusionCounts(), _mask([[0]]), _mask([[0, 0]]), [1])

    def test_background_only_when_listed(self):
        pred = _mask([[0, 1]])
        gt = _mask([[0, 0]])
        no_bg = accumulate(ConfusionCounts(), pred, gt, [1])
        assert no_bg.classes() == (1,)
        with_bg = accumulate(ConfusionCounts(), pred, gt, [0, 1])
        assert with_bg.counts(0) == (1, 0, 1)

    def test_merge_order_independent(self):
        rng = np.random.default_rng(1)
        pairs = [(rand_mask(rng, 6, 6, 2), rand_mask(rng, 6, 6, 2)) for _ in range(6)]
        total = ConfusionCounts()
        for p, g in pairs:
            total.add(p, g, [1, 2])
        shuffled = ConfusionCounts()
        for p, g in [pairs[i] for i in (3, 0, 5, 1, 4, 2)]:
            part = ConfusionCounts().add(p, g, [1, 2])
            shuffled.merge(part)
        for c in (1, 2):
            assert total.counts(c) == shuffled.counts(c)


class TestIou:
    def test_half(self):
        counts = accumulate(ConfusionCounts(), _mask([[1, 1], [0, 0]]), _mask([[1, 0], [0, 0]]), [1])
        assert iou(counts, 1) == 0.5

    def test_degenerate_zero(self):
        assert iou(ConfusionCounts(), 9) == 0.0

    def test_range_and_perfect_condition(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            counts = accumulate(
                ConfusionCounts(), rand_mask(rng, 8, 8, 2), rand_mask(rng, 8, 8, 2), [1, 2])
            for c in (1, 2):
                v = iou(counts, c)
                tp, fp, fn = counts.counts(c)
                assert 0.0 <= v <= 1.0
                assert (v == 1.0) == (fp == 0 and fn == 0 and tp > 0)

    def test_matches_set_arithmetic_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            pred = rand_mask(rng, 32, 32, 3)
            gt = rand_mask(rng, 32, 32, 3, p_ignore=0.05)
            counts = accumulate(ConfusionCounts(), pred, gt, [1, 2, 3])
            for c in (1, 2, 3):
                assert iou(counts, c) == oracle_iou(pred, gt, c)


class TestMiou:
    def test_single_class_identity(self):
        assert miou([0.37]) == 0.37

    def test_pair_mean(self):
        assert miou([0.4, 0.6]) == pytest.approx(0.5, abs=1e-12)

    def test_mapping_input(self):
        assert miou({1: 0.2, 2: 0.4}) == pytest.approx(0.3, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            miou([])

    def test_published_fold_mean(self):
        folds = [0.4075, 0.5751, 0.5053, 0.4108]
        assert abs(miou(folds) - 0.4747) <= 0.00005


class TestRelativeImprovement:
    def test_published_values(self):
        assert relative_improvement(0.5097, 0.4747) == 7.37
        assert relative_improvement(0.2467, 0.2229) == 10.68

    def test_zero_for_equal(self):
        assert relative_improvement(0.42, 0.42) == 0.0

    def test_half_up_rounding(self):
        assert relative_improvement(1.005, 1.0) == 0.5
        assert relative_improvement(1.0005, 1.0) == 0.05

    def test_non_positive_baseline(self):
        with pytest.raises(ValueError):
            relative_improvement(0.5, 0.0)
        with pytest.raises(ValueError):
            relative_improvement(0.5, -1.0)

    def test_formatting(self):
        assert format_improvement(7.37) == "+7.37%"
        assert format_improvement(0.0) == "+0.00%"
        assert format_improvement(-2.5) == "-2.50%"
