import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ggsp_mht.detection import (
    NONE_REJECTED,
    bh_procedure,
    compute_lfdr_vector,
    decide,
    detect,
    p_thresholds,
    select_eta,
)
from ggsp_mht.estimation import ObservationSet
from ggsp_mht.exceptions import InvalidInputError
from ggsp_mht.graph import graph_fourier_basis, laplacian, ring_graph
from ggsp_mht.model import TabulatedNull, lfdr, sigmoid

RING = graph_fourier_basis(laplacian(ring_graph(6)))
LINEAR_NULL = TabulatedNull([0.0, 1.0], [0.0, 2.0])


def brute_eta(vals, alpha):
    # r_M(eta) = sum of lfdr below eta / count below eta, scanned over every candidate
    best = None
    for eta in sorted(set(vals) | {0.0}):
        sel = vals[vals <= eta]
        if sel.size and sel.mean() <= alpha:
            best = eta
    return NONE_REJECTED if best is None else best


def brute_bh(p, alpha):
    m = len(p)
    kstar = 0
    for k in range(1, m + 1):
        kth = sorted(p)[k - 1]
        if kth <= k * alpha / m:
            kstar = k
    if kstar == 0:
        return np.zeros(m, dtype=np.int8)
    cut = sorted(p)[kstar - 1]
    return np.array([x <= cut for x in p], dtype=np.int8)


class TestSelectEta:
    def test_hand_example(self):
        assert select_eta([0.01, 0.02, 0.5], 0.1) == 0.02

    def test_none_rejected(self):
        assert select_eta([0.5, 0.9], 0.1) is NONE_REJECTED

    def test_ties_rejected_together(self):
        # prefix (0, 0.18) has mean 0.09 but the whole tie group gives 0.12
        assert select_eta([0.0, 0.18, 0.18], 0.1) == 0.0
        assert select_eta([0.0, 0.0, 0.18, 0.18], 0.1) == 0.18

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            m = int(rng.integers(1, 60))
            vals = np.round(rng.beta(0.5, 1.0, m), int(rng.integers(1, 4)))
            alpha = float(rng.uniform(0.01, 0.5))
            assert select_eta(vals, alpha) == brute_eta(vals, alpha)

    @settings(max_examples=200)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.floats(0.01, 0.99))
    def test_safety(self, vals, alpha):
        vals = np.array(vals)
        d = decide(vals, select_eta(vals, alpha))
        if d.any():
            assert vals[d == 1].mean() <= alpha

    @settings(max_examples=200)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.floats(0.01, 0.98), st.floats(0, 1))
    def test_alpha_monotone(self, vals, a1, frac):
        a2 = a1 + frac * (0.99 - a1)
        r1 = decide(vals, select_eta(vals, a1))
        r2 = decide(vals, select_eta(vals, a2))
        assert np.all(r1 <= r2)

    @pytest.mark.parametrize("bad", [[], [1.2], [float("nan")]])
    def test_invalid(self, bad):
        with pytest.raises(InvalidInputError):
            select_eta(bad, 0.1)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1])
    def test_bad_alpha(self, alpha):
        with pytest.raises(InvalidInputError):
            select_eta([0.1], alpha)


class TestDecide:
    def test_top(self):
        assert decide([0.0, 0.5, 1.0], 1.0).tolist() == [1, 1, 1]

    def test_none(self):
        assert decide([0.0, 0.5], NONE_REJECTED).tolist() == [0, 0]

    def test_detect_bundle(self):
        res = detect([0.01, 0.02, 0.5], 0.1, gammas=[0.0, 0.0, 0.0])
        assert res.eta_hat == 0.02 and res.n_rejected == 2 and not res.none_rejected
        assert detect([0.5], 0.1).none_rejected


class TestPThresholds:
    def test_top(self):
        np.testing.assert_array_equal(p_thresholds(1.0, [-3.0, 0.0, 4.0]), [1.0, 1.0, 1.0])

    def test_closed_form(self):
        assert p_thresholds(0.04, [0.0])[0] == pytest.approx(0.0016, rel=1e-14)

    def test_none(self):
        np.testing.assert_array_equal(p_thresholds(NONE_REJECTED, [1.0, 2.0]), [0.0, 0.0])

    def test_on_level_set(self):
        rng = np.random.default_rng(1)
        g = rng.uniform(-6, 6, 500)
        s = p_thresholds(0.3, g)
        np.testing.assert_allclose(lfdr(s, g), 0.3, rtol=1e-12)
        # the power amplifies rounding in 1 - a by ln(eta) / (1 - a)
        np.testing.assert_allclose(s, 0.3 ** (1 / (1 - sigmoid(g))), rtol=1e-9)

    def test_equivalence(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            m = int(rng.integers(1, 100))
            g = rng.uniform(-5, 5, m)
            p = rng.uniform(1e-8, 1.0, m) ** rng.uniform(1, 4)
            res = detect(lfdr(p, g), float(rng.uniform(0.01, 0.5)), gammas=g)
            np.testing.assert_array_equal((p <= res.p_thresholds).astype(np.int8), res.decisions)

    def test_tabulated_bisection(self):
        g = np.array([-1.0, 0.0, 2.0])
        s = p_thresholds(0.2, g, LINEAR_NULL)
        np.testing.assert_allclose(lfdr(s, g, LINEAR_NULL), 0.2, atol=1e-8)
        below = lfdr(s * (1 - 1e-6), g, LINEAR_NULL)
        assert np.all(below <= 0.2)


class TestLfdrVector:
    def test_all_ones(self):
        obs = ObservationSet(np.arange(6), np.zeros(6), np.ones(6))
        np.testing.assert_array_equal(compute_lfdr_vector(np.full((2, 3), 1.5), obs, RING), 1.0)

    def test_zero_signal(self):
        rng = np.random.default_rng(3)
        obs = ObservationSet(rng.integers(0, 6, 30), rng.uniform(-3, 3, 30), rng.uniform(0.001, 1, 30))
        np.testing.assert_allclose(compute_lfdr_vector(np.zeros((2, 3)), obs, RING), np.sqrt(obs.pvalues), rtol=1e-14)

    def test_matches_scalar(self):
        from ggsp_mht.basis import TemporalBasis, evaluate_gamma

        rng = np.random.default_rng(4)
        xi = rng.uniform(-5, 5, (3, 3))
        obs = ObservationSet(rng.integers(0, 6, 25), rng.uniform(-3, 3, 25), rng.uniform(0.001, 1, 25))
        vec = compute_lfdr_vector(xi, obs, RING)
        phi = RING.eigenvectors[:, :3]
        for m in range(25):
            g = evaluate_gamma(xi, obs.vertices[m], obs.times[m], phi, TemporalBasis(3))
            assert abs(vec[m] - lfdr(obs.pvalues[m], g)) <= 1e-14


class TestBH:
    def test_hand_example(self):
        assert bh_procedure([0.01, 0.02, 0.2, 0.9], 0.1).tolist() == [1, 1, 0, 0]

    def test_all_ones(self):
        assert not bh_procedure(np.ones(10), 0.2).any()

    def test_step_up(self):
        # 0.04 > 0.1/4 alone, but 0.045 <= 3 * 0.1 / 4 lifts the first three
        assert bh_procedure([0.04, 0.041, 0.045, 0.9], 0.1).tolist() == [1, 1, 1, 0]

    def test_brute_force(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            m = int(rng.integers(1, 51))
            p = rng.uniform(0, 1, m) ** rng.uniform(1, 5)
            alpha = float(rng.uniform(0.01, 0.5))
            np.testing.assert_array_equal(bh_procedure(p, alpha), brute_bh(p.tolist(), alpha))

    @settings(max_examples=100)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.randoms(use_true_random=False))
    def test_permutation(self, p, rnd):
        perm = list(range(len(p)))
        rnd.shuffle(perm)
        base = bh_procedure(p, 0.1)
        shuffled = bh_procedure([p[i] for i in perm], 0.1)
        np.testing.assert_array_equal(shuffled, base[perm])

    @settings(max_examples=100)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.floats(0.01, 0.5), st.floats(0.0, 0.4))
    def test_alpha_monotone(self, p, a1, delta):
        assert np.all(bh_procedure(p, a1) <= bh_procedure(p, min(a1 + delta, 0.99)))

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            bh_procedure([], 0.1)


def test_threshold_matches_sqrt_for_half():
    assert p_thresholds(0.5, [0.0])[0] == pytest.approx(0.25, rel=1e-14)
    assert math.isclose(lfdr(0.25, 0.0), 0.5)
