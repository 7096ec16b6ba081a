"""Self-checks of the scalar reference implementations on hand-computable
cases, plus small equivalence smoke runs (the full randomized suites live in
the acceptance module)."""

import math

import numpy as np
import pytest

from protoens import (
    FeatureVolume,
    Prototype,
    PrototypeSet,
    predict_probability_map,
)
from protoens.oracle import (
    oracle_cosine_distance,
    oracle_iou,
    oracle_predict,
    oracle_softmax,
)

from helpers import rand_mask, rand_protoset, rand_volume


class TestOracleHandCases:
    def test_cosine(self):
        assert oracle_cosine_distance([1.0, 0.0], [1.0, 0.0]) == 0.0
        assert oracle_cosine_distance([1.0, 0.0], [0.0, 1.0]) == 1.0
        assert oracle_cosine_distance([0.0, 0.0], [1.0, 1.0]) == 1.0
        assert oracle_cosine_distance([1.0, 1.0], [1.0, 0.0]) == pytest.approx(
            1.0 - 1.0 / math.sqrt(2), abs=1e-12)

    def test_softmax(self):
        probs = oracle_softmax([0.0, -1.0])
        assert probs[0] == pytest.approx(0.73106, abs=1e-5)
        assert probs[1] == pytest.approx(0.26894, abs=1e-5)

    def test_predict_hand_case(self):
        protos = PrototypeSet((
            Prototype(0, np.array([0.0, 1.0], dtype=np.float32)),
            Prototype(1, np.array([1.0, 0.0], dtype=np.float32)),
        ))
        query = FeatureVolume(np.tile(np.array([1.0, 0.0], dtype=np.float32), (2, 2, 1)))
        p = oracle_predict(query, protos, alpha=1.0)
        np.testing.assert_allclose(p.probs[0, 0], [0.26894, 0.73106], atol=1e-5)

    def test_predict_uniform_symmetry(self):
        rng = np.random.default_rng(0)
        vec = rng.normal(size=4).astype(np.float32)
        protos = PrototypeSet((Prototype(0, vec), Prototype(1, vec), Prototype(2, vec)))
        p = oracle_predict(rand_volume(rng, 2, 3, 4), protos)
        np.testing.assert_allclose(p.probs, 1.0 / 3.0, atol=1e-6)

    def test_iou_identical_and_disjoint(self):
        rng = np.random.default_rng(1)
        m = rand_mask(rng, 6, 6, 2)
        for c in (1, 2):
            if c in m.present_classes():
                assert oracle_iou(m, m, c) == 1.0
        from protoens import DenseMask
        left = DenseMask(np.array([[1, 1], [0, 0]], dtype=np.uint8))
        right = DenseMask(np.array([[0, 0], [1, 1]], dtype=np.uint8))
        assert oracle_iou(left, right, 1) == 0.0


class TestEquivalenceSmoke:
    def test_head_agreement_small(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            c = int(rng.integers(2, 7))
            query = rand_volume(rng, int(rng.integers(2, 6)), int(rng.integers(2, 6)), c)
            protos = rand_protoset(rng, [1, 3], c)
            alpha = float(rng.uniform(0.5, 10.0))
            fast = predict_probability_map(query, protos, alpha)
            slow = oracle_predict(query, protos, alpha)
            np.testing.assert_allclose(fast.probs, slow.probs, atol=1e-6)
