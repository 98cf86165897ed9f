import math

import numpy as np
import pytest

from ggsp_mht.basis import temporal_basis_eval
from ggsp_mht.estimation import (
    ObservationSet,
    OptimizerConfig,
    bic,
    grad_log_likelihood,
    log_likelihood,
    mle_fit,
    select_model,
)
from ggsp_mht.exceptions import InvalidBandwidthError, InvalidInputError, NumericalError
from ggsp_mht.graph import Graph, graph_fourier_basis, laplacian, ring_graph
from ggsp_mht.model import f_mix, sigmoid
from ggsp_mht.simulation import ScenarioConfig, generate_observations

RING = graph_fourier_basis(laplacian(ring_graph(8)))


def random_obs(rng, n_vertices, M, low=1e-6):
    return ObservationSet(
        rng.integers(0, n_vertices, M),
        rng.uniform(-math.pi, math.pi, M),
        rng.uniform(low, 1.0, M),
    )


def naive_loglik(xi, obs, phi):
    total = 0.0
    for v, t, p in zip(obs.vertices, obs.times, obs.pvalues):
        g = sum(
            xi[i, j] * phi[v, i] * temporal_basis_eval(j + 1, t)
            for i in range(xi.shape[0])
            for j in range(xi.shape[1])
        )
        total += math.log(f_mix(p, g))
    return total


def central_diff(xi, obs, phi, h=1e-6):
    out = np.zeros_like(xi)
    for idx in np.ndindex(xi.shape):
        up, dn = xi.copy(), xi.copy()
        up[idx] += h
        dn[idx] -= h
        out[idx] = (log_likelihood(up, obs, phi) - log_likelihood(dn, obs, phi)) / (2 * h)
    return out


class TestLogLikelihood:
    def test_single_sample_at_one(self):
        obs = ObservationSet(np.array([3]), np.array([0.5]), np.array([1.0]))
        xi = np.array([[1.0, -2.0], [0.5, 3.0]])
        phi = RING.eigenvectors[:, :2]
        g = phi[3] @ xi @ np.array([temporal_basis_eval(1, 0.5), temporal_basis_eval(2, 0.5)])
        assert log_likelihood(xi, obs, phi) == pytest.approx(math.log(sigmoid(g)), abs=1e-14)

    def test_zero_coefficients(self):
        rng = np.random.default_rng(0)
        obs = random_obs(rng, 8, 50)
        expect = sum(math.log(0.5 * p**-0.5) for p in obs.pvalues)
        assert log_likelihood(np.zeros((3, 3)), obs, RING) == pytest.approx(expect, abs=1e-10)

    def test_matches_naive(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            xi = rng.uniform(-5, 5, (3, 4))
            obs = random_obs(rng, 8, 40)
            phi = RING.eigenvectors[:, :3]
            assert abs(log_likelihood(xi, obs, phi) - naive_loglik(xi, obs, phi)) < 1e-10

    def test_bad_vertex(self):
        obs = ObservationSet(np.array([9]), np.array([0.0]), np.array([0.5]))
        with pytest.raises(InvalidInputError):
            log_likelihood(np.zeros((1, 1)), obs, RING)

    @pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning")
    def test_non_finite_names_sample(self):
        obs = ObservationSet(np.array([0, 1]), np.array([0.0, 0.0]), np.array([0.5, 0.5]))
        xi = np.array([[np.nan]])
        with pytest.raises(NumericalError) as info:
            log_likelihood(xi, obs, RING)
        assert info.value.index == 0


class TestGradient:
    def test_single_sample_at_one(self):
        obs = ObservationSet(np.array([2]), np.array([-1.0]), np.array([1.0]))
        xi = np.array([[0.7, 0.2, -0.4]])
        phi = RING.eigenvectors[:, :1]
        psi = np.array([temporal_basis_eval(j, -1.0) for j in (1, 2, 3)])
        a = sigmoid(phi[2, 0] * xi[0] @ psi)
        np.testing.assert_allclose(grad_log_likelihood(xi, obs, phi)[0], (1 - a) * phi[2, 0] * psi, atol=1e-15)

    def test_finite_differences(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            k1, k2 = rng.integers(1, 5, 2)
            xi = rng.uniform(-4, 4, (k1, k2))
            obs = random_obs(rng, 8, int(rng.integers(1, 200)))
            phi = RING.eigenvectors[:, :k1]
            g = grad_log_likelihood(xi, obs, phi)
            fd = central_diff(xi, obs, phi)
            assert np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1.0)) < 1e-5

    def test_zero_at_grid_maximizer(self):
        sc = ScenarioConfig(ring_graph(8), [[4.0]], sampling="uniform", n_samples=500)
        obs = generate_observations(sc, 5)
        phi = sc.basis.eigenvectors[:, :1]
        grid = np.linspace(-10, 10, 20001)
        ll = [log_likelihood([[x]], obs, phi) for x in grid]
        i = int(np.argmax(ll))
        assert 0 < i < grid.size - 1
        fine = np.linspace(grid[i - 1], grid[i + 1], 2001)
        best = fine[int(np.argmax([log_likelihood([[x]], obs, phi) for x in fine]))]
        assert abs(grad_log_likelihood([[best]], obs, phi)[0, 0]) < 1e-4
        # stopping rule is on the per-sample mean gradient; curvature here is ~2e-3
        fit = mle_fit(obs, phi, 1, box_bound=10.0)
        assert abs(fit.xi[0, 0] - best) < 1e-3


class TestMleFit:
    def test_recovers_scalar_coefficient(self):
        # single vertex: gamma = xi / sqrt(2 pi); Fisher information per sample is (1-a)^2
        sc = ScenarioConfig(Graph([[0]]), [[2.0]], sampling="uniform", n_samples=5000)
        a = sigmoid(2.0 / math.sqrt(2 * math.pi))
        se = math.sqrt(2 * math.pi) / ((1 - a) * math.sqrt(5000))
        est = []
        for s in range(20):
            fit = mle_fit(generate_observations(sc, s), sc.basis, 1, K1=1, seed=s)
            assert abs(fit.xi[0, 0] - 2.0) < 4 * se
            est.append(fit.xi[0, 0])
        assert abs(np.mean(est) - 2.0) < 0.15

    def test_all_ones_hits_box(self):
        obs = ObservationSet(np.arange(8).repeat(3), np.tile([-1.0, 0.0, 1.0], 8), np.ones(24))
        fit = mle_fit(obs, RING, 1, K1=1, box_bound=10.0)
        assert fit.xi[0, 0] == 10.0
        fit = mle_fit(obs, RING, 3, K1=2, box_bound=5.0)
        assert fit.xi[0, 0] == 5.0

    def test_beats_random_probes(self):
        rng = np.random.default_rng(4)
        sc = ScenarioConfig(ring_graph(8), [[6.0, -3.0], [4.0, 2.0]], sampling="uniform", n_samples=800)
        obs = generate_observations(sc, 9)
        fit = mle_fit(obs, sc.basis, 2, K1=2)
        for _ in range(20):
            probe = rng.uniform(-10, 10, (2, 2))
            assert fit.log_likelihood >= log_likelihood(probe, obs, sc.basis)

    def test_ascent_and_feasibility(self):
        rng = np.random.default_rng(5)
        obs = random_obs(rng, 8, 300, low=1e-4)
        fit = mle_fit(obs, RING, 3, K1=3, box_bound=2.0, keep_trace=True)
        assert np.all(np.diff(fit.trace) >= 0)
        assert np.all(np.abs(fit.xi) <= 2.0)
        assert fit.trace[-1] == pytest.approx(fit.log_likelihood)

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        obs = random_obs(rng, 8, 200)
        a = mle_fit(obs, RING, 3, K1=2, seed=11)
        b = mle_fit(obs, RING, 3, K1=2, seed=11)
        assert a.xi.tobytes() == b.xi.tobytes()
        assert a.log_likelihood == b.log_likelihood

    def test_reports_non_convergence(self):
        rng = np.random.default_rng(7)
        obs = random_obs(rng, 8, 200)
        fit = mle_fit(obs, RING, 3, K1=2, config=OptimizerConfig(max_iters=1, restarts=1))
        assert not fit.converged

    def test_empty(self):
        empty = ObservationSet(np.array([], dtype=int), np.array([]), np.array([]))
        with pytest.raises(InvalidInputError):
            mle_fit(empty, RING, 1)

    def test_bad_config(self):
        with pytest.raises(InvalidInputError):
            OptimizerConfig(backtrack=1.5)


class TestBic:
    def test_values(self):
        assert bic(1, 1, 100, -50.0) == pytest.approx(104.6052, abs=1e-4)
        assert bic(2, 3, 100, 0.0) == pytest.approx(27.6310, abs=1e-4)

    def test_penalty_monotone(self):
        assert bic(2, 2, 50, -10.0) < bic(2, 3, 50, -10.0) < bic(3, 3, 50, -10.0)


class TestSelectModel:
    def test_singleton(self):
        rng = np.random.default_rng(8)
        obs = random_obs(rng, 8, 100)
        best, table = select_model(obs, RING, [(1, 1)])
        assert (best.K1, best.K2) == (1, 1) and len(table) == 1

    def test_table_bookkeeping(self):
        rng = np.random.default_rng(9)
        obs = random_obs(rng, 8, 150)
        grid = [(1, 1), (1, 3), (2, 1), (3, 3)]
        best, table = select_model(obs, RING, grid, config=OptimizerConfig(restarts=2))
        assert [(r["K1"], r["K2"]) for r in table] == grid
        for r in table:
            assert r["bic"] == bic(r["K1"], r["K2"], obs.M, r["log_likelihood"])
        assert best.K1 * best.K2 == min(table, key=lambda r: r["bic"])["K1"] * min(table, key=lambda r: r["bic"])["K2"]

    def test_tie_break(self, monkeypatch):
        import ggsp_mht.estimation as est

        monkeypatch.setattr(est, "bic", lambda k1, k2, M, l: 0.0)
        rng = np.random.default_rng(10)
        obs = random_obs(rng, 8, 50)
        best, _ = select_model(obs, RING, [(2, 1), (1, 3), (1, 2)], config=OptimizerConfig(restarts=1))
        assert (best.K1, best.K2) == (1, 2)

    def test_bad_grid(self):
        rng = np.random.default_rng(11)
        obs = random_obs(rng, 8, 20)
        with pytest.raises(InvalidBandwidthError):
            select_model(obs, RING, [(9, 1)])
        with pytest.raises(InvalidInputError):
            select_model(obs, RING, [])

    @pytest.mark.slow
    def test_selection_consistency(self):
        sc = ScenarioConfig(
            ring_graph(16), [[8.0, 6.0, -6.0], [7.0, -5.0, 6.0]],
            sampling="uniform", n_samples=4000,
        )
        grid = [(k1, k2) for k1 in range(1, 5) for k2 in range(1, 5)]
        hits = 0
        for s in range(20):
            obs = generate_observations(sc, 100 + s)
            best, _ = select_model(obs, sc.basis, grid, config=OptimizerConfig(restarts=2), seed=s)
            hits += best.K1 * best.K2 >= 6
        assert hits >= 16
