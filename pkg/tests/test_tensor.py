import math

import numpy as np
import pytest

from protoens import (
    DenseMask,
    FeatureVolume,
    ProbMap,
    ShapeMismatchError,
    argmax_decode,
    bilinear_resize,
    channel_concat,
    cosine_distance,
    cosine_distance_map,
    softmax_map,
    softmax_scores,
)
from protoens.oracle import oracle_bilinear_resize

from helpers import rand_volume


class TestTypes:
    def test_volume_rejects_nan(self):
        with pytest.raises(ValueError, match="NaN"):
            FeatureVolume(np.full((1, 1, 2), np.nan, dtype=np.float32))

    def test_volume_rejects_zero_dim(self):
        with pytest.raises(ValueError):
            FeatureVolume(np.zeros((0, 2, 2), dtype=np.float32))

    def test_volume_is_immutable(self):
        v = FeatureVolume(np.zeros((2, 2, 1), dtype=np.float32))
        with pytest.raises(ValueError):
            v.data[0, 0, 0] = 1.0

    def test_mask_casts_small_ints(self):
        m = DenseMask(np.array([[0, 3], [255, 1]]))
        assert m.labels.dtype == np.uint8
        assert m.present_classes() == (1, 3)

    def test_probmap_rejects_bad_sum(self):
        with pytest.raises(ValueError, match="sum to 1"):
            ProbMap(np.full((1, 1, 2), 0.6, dtype=np.float32))

    def test_probmap_rejects_negative(self):
        with pytest.raises(ValueError):
            ProbMap(np.array([[[1.2, -0.2]]], dtype=np.float32))


class TestBilinearResize:
    def test_constant_field_from_single_pixel(self):
        v = FeatureVolume(np.array([[[1.0, 2.0, 3.0]]], dtype=np.float32))
        out = bilinear_resize(v, 4, 5)
        assert out.data.shape == (4, 5, 3)
        assert (out.data == np.array([1.0, 2.0, 3.0], dtype=np.float32)).all()

    def test_identity_is_bit_exact(self):
        rng = np.random.default_rng(0)
        v = rand_volume(rng, 5, 7, 3, scale=100.0)
        out = bilinear_resize(v, 5, 7)
        assert (out.data == v.data).all()

    def test_center_value_2x2_to_3x3(self):
        v = FeatureVolume(np.array([[[1.0], [3.0]], [[5.0], [7.0]]], dtype=np.float32))
        out = bilinear_resize(v, 3, 3)
        assert out.data[1, 1, 0] == 4.0

    def test_zero_output_dim_rejected(self):
        v = FeatureVolume(np.zeros((2, 2, 1), dtype=np.float32))
        with pytest.raises(ValueError):
            bilinear_resize(v, 0, 3)

    def test_round_trip_reproduces_corners_exactly(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            h, w = int(rng.integers(2, 9)), int(rng.integers(2, 9))
            oh, ow = int(rng.integers(2, 13)), int(rng.integers(2, 13))
            v = rand_volume(rng, h, w, 2)
            back = bilinear_resize(bilinear_resize(v, oh, ow), h, w)
            for y, x in ((0, 0), (0, w - 1), (h - 1, 0), (h - 1, w - 1)):
                assert (back.data[y, x] == v.data[y, x]).all()

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            h, w = int(rng.integers(1, 7)), int(rng.integers(1, 7))
            oh, ow = int(rng.integers(1, 9)), int(rng.integers(1, 9))
            v = rand_volume(rng, h, w, 3)
            fast = bilinear_resize(v, oh, ow)
            slow = oracle_bilinear_resize(v, oh, ow)
            np.testing.assert_allclose(fast.data, slow.data, atol=1e-6)


class TestChannelConcat:
    def test_single_volume_identity(self):
        rng = np.random.default_rng(3)
        v = rand_volume(rng, 2, 3, 4)
        assert (channel_concat([v]).data == v.data).all()

    def test_duplication(self):
        v = FeatureVolume(np.array([[[1.0, 2.0]]], dtype=np.float32))
        out = channel_concat([v, v])
        assert out.data.shape == (1, 1, 4)
        assert (out.data[0, 0] == np.array([1.0, 2.0, 1.0, 2.0], dtype=np.float32)).all()

    def test_shape_arithmetic(self):
        rng = np.random.default_rng(4)
        out = channel_concat([rand_volume(rng, 2, 2, 3), rand_volume(rng, 2, 2, 5)])
        assert out.channels == 8

    def test_mismatch_names_offending_index(self):
        rng = np.random.default_rng(5)
        with pytest.raises(ShapeMismatchError, match="volume 1"):
            channel_concat([rand_volume(rng, 2, 2, 1), rand_volume(rng, 3, 2, 1)])

    def test_associative_bit_exact(self):
        rng = np.random.default_rng(6)
        a, b, c = (rand_volume(rng, 3, 3, k) for k in (2, 3, 4))
        left = channel_concat([channel_concat([a, b]), c])
        flat = channel_concat([a, b, c])
        assert (left.data == flat.data).all()


class TestCosineDistance:
    def test_identical(self):
        assert cosine_distance([1.0, 0.0], [1.0, 0.0]) == 0.0

    def test_orthogonal(self):
        assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == 1.0

    def test_hand_value(self):
        assert cosine_distance([1.0, 1.0], [1.0, 0.0]) == pytest.approx(1.0 - 1.0 / math.sqrt(2), abs=1e-12)

    def test_zero_norm_rule(self):
        assert cosine_distance([0.0, 0.0], [3.0, 4.0]) == 1.0
        assert cosine_distance([1e-13, 0.0], [3.0, 4.0]) == 1.0

    def test_range_and_scale_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            a = rng.normal(size=6)
            b = rng.normal(size=6)
            lam, mu = rng.uniform(0.01, 100.0, size=2)
            d = cosine_distance(a, b)
            assert 0.0 <= d <= 2.0
            assert cosine_distance(lam * a, mu * b) == pytest.approx(d, abs=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            cosine_distance([1.0], [1.0, 2.0])

    def test_map_agrees_with_scalar(self):
        rng = np.random.default_rng(8)
        v = rand_volume(rng, 4, 5, 6)
        mat = rng.normal(size=(3, 6))
        dmap = cosine_distance_map(v, mat)
        for y in range(4):
            for x in range(5):
                for j in range(3):
                    assert dmap[y, x, j] == pytest.approx(
                        cosine_distance(v.data[y, x], mat[j]), abs=1e-9)


class TestSoftmax:
    def test_symmetry_pairs(self):
        np.testing.assert_allclose(softmax_scores([0.0, 0.0]), [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(softmax_scores([2.5, 2.5, 2.5]), [1 / 3] * 3, atol=1e-12)

    def test_hand_value(self):
        p = softmax_scores([0.0, -1.0])
        assert p[0] == pytest.approx(0.73106, abs=1e-5)
        assert p[1] == pytest.approx(0.26894, abs=1e-5)

    def test_sums_to_one(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            s = rng.normal(scale=50.0, size=int(rng.integers(1, 12)))
            assert abs(softmax_scores(s).sum() - 1.0) < 1e-7

    def test_shift_invariance(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            s = rng.normal(size=5)
            c = rng.uniform(-100, 100)
            np.testing.assert_allclose(softmax_scores(s), softmax_scores(s + c), atol=1e-6)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            softmax_scores([0.0, np.inf])


class TestArgmaxDecode:
    def test_uniform_ties_to_background(self):
        p = ProbMap(np.full((3, 3, 4), 0.25, dtype=np.float32))
        assert (argmax_decode(p).labels == 0).all()

    def test_simple_argmax(self):
        p = ProbMap(np.array([[[0.2, 0.8]]], dtype=np.float32))
        assert argmax_decode(p).labels[0, 0] == 1

    def test_matches_per_pixel_loop(self):
        rng = np.random.default_rng(11)
        scores = rng.normal(size=(8, 8, 3))
        p = softmax_map(scores)
        decoded = argmax_decode(p)
        for y in range(8):
            for x in range(8):
                assert decoded.labels[y, x] == int(np.argmax(p.probs[y, x]))

    def test_invariant_under_monotone_score_transform(self):
        rng = np.random.default_rng(12)
        scores = rng.normal(size=(6, 6, 4))
        base = argmax_decode(softmax_map(scores))
        for transform in (lambda s: 2.0 * s + 1.0, lambda s: s ** 3, np.tanh):
            other = argmax_decode(softmax_map(transform(scores)))
            assert (other.labels == base.labels).all()
