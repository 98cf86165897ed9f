"""Synthetic data from the graph x time two-groups model and Monte Carlo benchmarks.

Trial seeds come from a SplitMix64 stream started at the master seed: trial
``i`` (0-based) uses the ``(i+1)``-th output, i.e.
``mix64(master + (i + 1) * 0x9E3779B97F4A7C15 mod 2**64)`` where ``mix64`` is
the SplitMix64 finalizer. Each trial then draws from
``numpy.random.default_rng(trial_seed)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .basis import gamma_values
from .detection import (
    DetectionResult,
    bh_procedure,
    compute_lfdr_vector,
    decide,
    select_eta,
)
from .estimation import ObservationSet, OptimizerConfig, mle_fit, select_model
from .exceptions import FitFailureError, InvalidInputError, NumericalError, SelectionError
from .graph import Graph, SpectralBasis, graph_fourier_basis, laplacian
from .model import P_FLOOR, UNIFORM, f1_cdf, pi0_from_mix, sigmoid

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15

METHODS = ("plug-in", "oracle", "BH")
DEFAULT_ALPHAS = (0.05, 0.10, 0.15, 0.20, 0.25)


def mix64(z: int) -> int:
    """SplitMix64 output finalizer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trial_seed(master_seed: int, trial_index: int) -> int:
    return mix64(master_seed + (trial_index + 1) * _GOLDEN_GAMMA)


def time_grid(T: int) -> np.ndarray:
    """``T + 1`` equispaced times ``-pi + 2 pi j / T`` for ``j = 0..T``."""
    return -math.pi + 2.0 * math.pi * np.arange(T + 1) / T


@dataclass
class ScenarioConfig:
    """A synthetic experiment: graph, true signal, sampling design and trial plan.

    ``true_xi`` has shape ``(K1, K2)`` of the data-generating signal. When
    ``bandwidth`` is set the plug-in fit uses it directly; otherwise the
    bandwidth is chosen by BIC over ``bic_grid``.
    """

    graph: Graph
    true_xi: np.ndarray
    T: int = 60
    box_bound: float = 10.0
    null: object = UNIFORM
    alphas: tuple = DEFAULT_ALPHAS
    trials: int = 20
    seed: int = 0
    bic_grid: list | None = None
    bandwidth: tuple | None = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    sampling: str = "grid"
    n_samples: int | None = None

    def __post_init__(self):
        self.true_xi = np.asarray(self.true_xi, dtype=float)
        if self.true_xi.ndim != 2:
            raise InvalidInputError("true_xi must be a K1 x K2 matrix")
        if self.true_xi.shape[0] > self.graph.n_vertices:
            raise InvalidInputError("true K1 exceeds the number of vertices")
        if np.any(np.abs(self.true_xi) > self.box_bound):
            raise InvalidInputError("true coefficients lie outside the box")
        if int(self.T) != self.T or self.T < 1:
            raise InvalidInputError("T must be a positive integer")
        if int(self.trials) != self.trials or self.trials < 1:
            raise InvalidInputError("trials must be a positive integer")
        if self.sampling not in ("grid", "uniform"):
            raise InvalidInputError("sampling must be 'grid' or 'uniform'")
        if self.sampling == "uniform" and not (self.n_samples and self.n_samples >= 1):
            raise InvalidInputError("uniform sampling needs n_samples >= 1")
        for a in self.alphas:
            if not 0 < a < 1:
                raise InvalidInputError(f"alpha {a!r} outside (0, 1)")
        self.alphas = tuple(float(a) for a in self.alphas)
        self._basis = None

    @property
    def basis(self) -> SpectralBasis:
        if self._basis is None:
            self._basis = graph_fourier_basis(laplacian(self.graph))
        return self._basis

    @property
    def true_phi(self) -> np.ndarray:
        return self.basis.eigenvectors[:, : self.true_xi.shape[0]]


def random_xi(K1: int, K2: int, box_bound: float, seed: int, scale: float = 1.0) -> np.ndarray:
    """Coefficients drawn uniformly from ``[-scale B, scale B]``."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale * box_bound, scale * box_bound, size=(K1, K2))


def sample_alternative(gamma, u, null=UNIFORM, tol: float = 1e-12) -> np.ndarray:
    """Inverse-CDF draws from the alternative density at signal ``gamma``.

    Bisection runs on ``s = p^a`` in [0, 1], where the CDF is well spread
    even when ``a`` is small, and returns ``p = s^(1/a)``.
    """
    gamma = np.asarray(gamma, dtype=float)
    u = np.asarray(u, dtype=float)
    a = np.asarray(sigmoid(gamma))
    lo = np.zeros_like(u)
    hi = np.ones_like(u)
    n_iter = int(math.ceil(math.log2(1.0 / tol)))
    with np.errstate(under="ignore"):
        for _ in range(n_iter):
            mid = 0.5 * (lo + hi)
            below = np.asarray(f1_cdf(mid ** (1.0 / a), gamma, null)) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return (0.5 * (lo + hi)) ** (1.0 / a)


def generate_observations(scenario: ScenarioConfig, seed: int) -> ObservationSet:
    """Draw sample points, null/alternative labels and p-values for one trial."""
    rng = np.random.default_rng(seed)
    n = scenario.graph.n_vertices
    if scenario.sampling == "grid":
        times = np.tile(time_grid(scenario.T), n)
        vertices = np.repeat(np.arange(n), scenario.T + 1)
    else:
        M = int(scenario.n_samples)
        vertices = rng.integers(0, n, size=M)
        times = rng.uniform(-math.pi, math.pi, size=M)
    gam = gamma_values(scenario.true_xi, vertices, times, scenario.true_phi)
    pi0 = np.asarray(pi0_from_mix(gam, scenario.null))
    u_theta = rng.random(vertices.size)
    u_p = rng.random(vertices.size)
    theta = (u_theta >= pi0).astype(np.int8)

    p = np.empty(vertices.size)
    null_idx = theta == 0
    p[null_idx] = scenario.null.ppf(u_p[null_idx])
    alt = ~null_idx
    if np.any(alt):
        p[alt] = sample_alternative(gam[alt], u_p[alt], scenario.null)
    p = np.clip(p, P_FLOOR, 1.0)
    return ObservationSet(vertices, times, p, theta)


@dataclass(frozen=True)
class TrialOutcome:
    fdp: float
    tpp: float
    rejections: int


def empirical_fdp_tpp(decisions, theta) -> TrialOutcome:
    """False discovery and true positive proportions, each guarded by ``max(., 1)``."""
    d = np.asarray(decisions).astype(bool).ravel()
    th = np.asarray(theta).astype(bool).ravel()
    if d.shape != th.shape:
        raise InvalidInputError("decisions and theta differ in length")
    rej = int(d.sum())
    false_rej = int(np.sum(d & ~th))
    true_rej = int(np.sum(d & th))
    return TrialOutcome(
        fdp=false_rej / max(rej, 1),
        tpp=true_rej / max(int(th.sum()), 1),
        rejections=rej,
    )


def oracle_detect(true_xi, obs: ObservationSet, alpha: float, phi, null=UNIFORM) -> DetectionResult:
    """Local-fdr rule computed from the true signal."""
    lf = compute_lfdr_vector(true_xi, obs, phi, null)
    eta = select_eta(lf, alpha)
    return DetectionResult(lf, eta, decide(lf, eta))


def fit_plugin(scenario: ScenarioConfig, obs: ObservationSet, seed: int):
    if scenario.bandwidth is not None:
        k1, k2 = scenario.bandwidth
        return mle_fit(obs, scenario.basis, k2, K1=k1, box_bound=scenario.box_bound,
                       config=scenario.optimizer, seed=seed)
    fit, _ = select_model(obs, scenario.basis, scenario.bic_grid,
                          box_bound=scenario.box_bound, config=scenario.optimizer, seed=seed)
    return fit


def run_trial(scenario: ScenarioConfig, index: int) -> dict:
    """One Monte Carlo trial: outcomes keyed by ``(alpha, method)``.

    A failed plug-in fit leaves its entries out and sets ``fit_error``.
    """
    seed = trial_seed(scenario.seed, index)
    obs = generate_observations(scenario, seed)
    out = {"index": index, "seed": seed, "outcomes": {}, "fit_error": None, "K": None}
    try:
        fit = fit_plugin(scenario, obs, seed)
    except (FitFailureError, SelectionError, NumericalError) as exc:
        logger.warning("trial %d: plug-in fit failed: %s", index, exc)
        out["fit_error"] = str(exc)
        lf_plug = None
    else:
        out["K"] = (fit.K1, fit.K2)
        lf_plug = compute_lfdr_vector(fit.xi, obs, scenario.basis, scenario.null)
    lf_orac = compute_lfdr_vector(scenario.true_xi, obs, scenario.basis, scenario.null)
    for alpha in scenario.alphas:
        if lf_plug is not None:
            d = decide(lf_plug, select_eta(lf_plug, alpha))
            out["outcomes"][(alpha, "plug-in")] = empirical_fdp_tpp(d, obs.theta)
        d = decide(lf_orac, select_eta(lf_orac, alpha))
        out["outcomes"][(alpha, "oracle")] = empirical_fdp_tpp(d, obs.theta)
        out["outcomes"][(alpha, "BH")] = empirical_fdp_tpp(bh_procedure(obs.pvalues, alpha), obs.theta)
    return out


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return float("nan"), float("nan")
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(np.mean(x)), se


def aggregate(trials: list, alphas) -> list:
    """Benchmark rows from per-trial outcomes; independent of trial order."""
    trials = sorted(trials, key=lambda t: t["index"])
    rows = []
    for alpha in alphas:
        for method in METHODS:
            res = [t["outcomes"][(alpha, method)] for t in trials if (alpha, method) in t["outcomes"]]
            mf, sf = _mean_se([r.fdp for r in res])
            mp, sp = _mean_se([r.tpp for r in res])
            rows.append({
                "alpha": alpha, "method": method,
                "mean_fdr": mf, "se_fdr": sf,
                "mean_power": mp, "se_power": sp,
                "trials_used": len(res),
            })
    return rows


@dataclass
class BenchmarkResult:
    rows: list
    trials: list

    @property
    def failures(self) -> list:
        return [{"trial": t["index"], "error": t["fit_error"]} for t in self.trials if t["fit_error"]]

    def row(self, alpha: float, method: str) -> dict:
        for r in self.rows:
            if r["method"] == method and math.isclose(r["alpha"], alpha):
                return r
        raise KeyError((alpha, method))


def run_benchmark(scenario: ScenarioConfig) -> BenchmarkResult:
    """Empirical FDR and power of plug-in, oracle and BH over the alpha grid."""
    trials = [run_trial(scenario, i) for i in range(scenario.trials)]
    return BenchmarkResult(aggregate(trials, scenario.alphas), trials)
