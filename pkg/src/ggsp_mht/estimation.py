"""Maximum-likelihood fitting of the bandlimited signal and BIC bandwidth selection."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .basis import CoefficientMatrix, design_factors, gamma_from_factors
from .exceptions import (
    FitFailureError,
    InvalidBandwidthError,
    InvalidInputError,
    NumericalError,
    SelectionError,
)
from .graph import SpectralBasis
from .model import clamp_pvalues, log_sigmoid, sigmoid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObservationSet:
    """Samples ``(vertex index, normalized time, p-value)`` with optional labels.

    ``theta[m] = 1`` marks a true alternative; only simulations provide it.
    """

    vertices: np.ndarray
    times: np.ndarray
    pvalues: np.ndarray
    theta: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.vertices)
        if v.size == 0:
            v = v.astype(np.int64)
        if v.ndim != 1 or not np.issubdtype(v.dtype, np.integer):
            raise InvalidInputError("vertices must be a 1-D integer array")
        t = np.asarray(self.times, dtype=float)
        p = clamp_pvalues(self.pvalues) if np.size(self.pvalues) else np.empty(0)
        if not (v.shape == t.shape == p.shape):
            raise InvalidInputError("vertices, times and p-values differ in length")
        if np.any(~np.isfinite(t)) or np.any(np.abs(t) > math.pi + 1e-12):
            raise InvalidInputError("normalized times must lie in [-pi, pi]")
        if np.any(v < 0):
            raise InvalidInputError("vertex indices must be non-negative")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "pvalues", p)
        if self.theta is not None:
            th = np.asarray(self.theta)
            if th.shape != p.shape or not np.all((th == 0) | (th == 1)):
                raise InvalidInputError("theta must be a 0/1 vector matching the samples")
            object.__setattr__(self, "theta", th.astype(np.int8))

    @property
    def M(self) -> int:
        return int(self.pvalues.shape[0])

    def __len__(self):
        return self.M


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for projected gradient ascent with Armijo backtracking."""

    step_init: float = 1.0
    backtrack: float = 0.5
    armijo_c: float = 1e-4
    max_iters: int = 500
    grad_tol: float = 1e-6
    restarts: int = 5

    def __post_init__(self):
        if not (self.step_init > 0 and self.armijo_c > 0 and self.grad_tol > 0):
            raise InvalidInputError("optimizer settings must be positive")
        if not 0 < self.backtrack < 1:
            raise InvalidInputError("backtracking factor must lie in (0, 1)")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidInputError("max_iters must be a positive integer")
        if int(self.restarts) != self.restarts or self.restarts < 1:
            raise InvalidInputError("restarts must be a positive integer")


@dataclass(frozen=True)
class FitResult:
    xi_hat: CoefficientMatrix
    log_likelihood: float
    iterations: int
    converged: bool
    K1: int
    K2: int
    restart_log_likelihoods: tuple = ()
    trace: tuple = field(default=(), repr=False)

    @property
    def xi(self) -> np.ndarray:
        return self.xi_hat.xi


def _phi_matrix(phi, K1=None) -> np.ndarray:
    mat = phi.eigenvectors if isinstance(phi, SpectralBasis) else np.asarray(phi, dtype=float)
    if K1 is not None:
        if K1 > mat.shape[1]:
            raise InvalidBandwidthError(f"K1={K1} exceeds the {mat.shape[1]} available components")
        mat = mat[:, :K1]
    return mat


class _Objective:
    """Log-likelihood and its gradient with the design factors precomputed."""

    def __init__(self, obs: ObservationSet, phi: np.ndarray, K2: int):
        if obs.M and obs.vertices.max() >= phi.shape[0]:
            raise InvalidInputError("vertex index out of range for the graph basis")
        self.g, self.h = design_factors(obs.vertices, obs.times, phi, K2)
        self.logp = np.log(obs.pvalues)
        self.shape = (phi.shape[1], K2)

    def terms(self, xi: np.ndarray):
        gamma = gamma_from_factors(xi, self.g, self.h)
        a = sigmoid(gamma)
        ll = log_sigmoid(gamma) + (a - 1.0) * self.logp
        bad = ~np.isfinite(ll)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise NumericalError(f"non-finite log-likelihood at sample {i}", index=i)
        return a, ll

    def value(self, xi) -> float:
        return float(np.sum(self.terms(xi)[1]))

    def value_and_grad(self, xi):
        a, ll = self.terms(xi)
        # d/dgamma [ln a + (a-1) ln p] = (1/a + ln p) a (1-a)
        w = (1.0 - a) + a * (1.0 - a) * self.logp
        grad = self.g.T @ (w[:, None] * self.h)
        return float(np.sum(ll)), grad


def log_likelihood(xi, obs: ObservationSet, phi, K1=None) -> float:
    """Sum over samples of ``ln f_mix(p_m | gamma(v_m, t_m; xi))``.

    ``phi`` is the graph Fourier basis (array or :class:`SpectralBasis`),
    truncated to ``xi.shape[0]`` columns if wider.
    """
    xi = xi.xi if isinstance(xi, CoefficientMatrix) else np.asarray(xi, dtype=float)
    phi = _phi_matrix(phi, xi.shape[0] if K1 is None else K1)
    return _Objective(obs, phi, xi.shape[1]).value(xi)


def grad_log_likelihood(xi, obs: ObservationSet, phi, K1=None) -> np.ndarray:
    """Gradient of :func:`log_likelihood` with respect to the coefficients."""
    xi = xi.xi if isinstance(xi, CoefficientMatrix) else np.asarray(xi, dtype=float)
    phi = _phi_matrix(phi, xi.shape[0] if K1 is None else K1)
    return _Objective(obs, phi, xi.shape[1]).value_and_grad(xi)[1]


def _ascend(obj: _Objective, x0, box, cfg: OptimizerConfig, M: int, keep_trace: bool):
    # work on the per-sample mean so step sizes do not depend on M
    def f_and_g(x):
        v, g = obj.value_and_grad(x)
        return v / M, g / M

    x = np.clip(x0, -box, box)
    f, g = f_and_g(x)
    trace = [f * M] if keep_trace else []
    step = cfg.step_init
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        pg = np.clip(x + g, -box, box) - x
        if np.linalg.norm(pg) < cfg.grad_tol:
            converged = True
            it -= 1
            break
        s = step
        while True:
            xn = np.clip(x + s * g, -box, box)
            fn = obj.value(xn) / M
            if fn >= f + cfg.armijo_c * float(np.sum(g * (xn - x))):
                break
            s *= cfg.backtrack
            if s < 1e-16 * cfg.step_init:
                xn = None
                break
        if xn is None:
            # no ascent direction left at machine precision
            converged = bool(np.linalg.norm(pg) < math.sqrt(cfg.grad_tol))
            break
        step = min(s / cfg.backtrack, 1e8) if s == step else s
        x = xn
        f, g = f_and_g(x)
        if keep_trace:
            trace.append(f * M)
    return x, f * M, it, converged, trace


def mle_fit(
    obs: ObservationSet,
    phi,
    K2: int,
    K1: int | None = None,
    box_bound: float = 10.0,
    config: OptimizerConfig | None = None,
    seed: int = 0,
    keep_trace: bool = False,
) -> FitResult:
    """Maximize the log-likelihood over the box ``[-B, B]^(K1 x K2)``.

    Projected gradient ascent with Armijo backtracking, started from zero
    and from ``restarts - 1`` points drawn uniformly in the box; the restart
    with the largest final likelihood wins. The step size grows after every
    step accepted without backtracking.
    """
    cfg = config or OptimizerConfig()
    if obs.M < 1:
        raise InvalidInputError("at least one observation is required")
    if not box_bound > 0:
        raise InvalidInputError("box bound must be positive")
    phi = _phi_matrix(phi, K1)
    K1 = phi.shape[1]
    obj = _Objective(obs, phi, K2)
    rng = np.random.default_rng(seed)
    starts = [np.zeros((K1, K2))]
    starts += [rng.uniform(-box_bound, box_bound, size=(K1, K2)) for _ in range(cfg.restarts - 1)]

    best = None
    lls = []
    for r, x0 in enumerate(starts):
        try:
            x, ll, it, conv, trace = _ascend(obj, x0, box_bound, cfg, obs.M, keep_trace)
        except NumericalError as exc:
            logger.warning("restart %d failed: %s", r, exc)
            lls.append(float("-inf"))
            continue
        lls.append(ll)
        if math.isfinite(ll) and (best is None or ll > best[1]):
            best = (x, ll, it, conv, trace)
    if best is None:
        raise FitFailureError(f"no restart reached a finite likelihood (K1={K1}, K2={K2})")
    x, ll, it, conv, trace = best
    return FitResult(
        xi_hat=CoefficientMatrix(x, box_bound),
        log_likelihood=ll,
        iterations=it,
        converged=conv,
        K1=K1,
        K2=K2,
        restart_log_likelihoods=tuple(lls),
        trace=tuple(trace),
    )


def bic(K1: int, K2: int, M: int, l_star: float) -> float:
    """Bayesian information criterion ``K1 K2 ln M - 2 l*``."""
    if M < 1:
        raise InvalidInputError("M must be at least 1")
    return K1 * K2 * math.log(M) - 2.0 * l_star


def default_bic_grid(n_vertices: int):
    return [(k1, k2) for k1 in range(1, min(6, n_vertices) + 1) for k2 in (1, 3, 5, 7, 9)]


def select_model(
    obs: ObservationSet,
    basis,
    grid=None,
    box_bound: float = 10.0,
    config: OptimizerConfig | None = None,
    seed: int = 0,
):
    """Fit every ``(K1, K2)`` in ``grid`` and keep the smallest BIC.

    Ties are broken by the smaller ``K1 * K2``, then the smaller ``K1``.

    Returns
    -------
    best : FitResult
    table : list of dict
        One row per grid cell, in grid order, with keys ``K1``, ``K2``,
        ``log_likelihood``, ``bic``, ``converged`` and ``error``.
    """
    phi_full = _phi_matrix(basis)
    grid = list(grid) if grid is not None else default_bic_grid(phi_full.shape[0])
    if not grid:
        raise InvalidInputError("bandwidth grid is empty")
    for k1, k2 in grid:
        if not 1 <= k1 <= phi_full.shape[1]:
            raise InvalidBandwidthError(f"K1={k1} outside [1, {phi_full.shape[1]}]")
        if k2 < 1:
            raise InvalidBandwidthError(f"K2={k2} must be positive")

    fits = {}
    table = []
    for k1, k2 in grid:
        row = {"K1": k1, "K2": k2, "log_likelihood": None, "bic": None,
               "converged": None, "error": None}
        try:
            fit = mle_fit(obs, phi_full, k2, K1=k1, box_bound=box_bound, config=config, seed=seed)
        except (FitFailureError, NumericalError) as exc:
            row["error"] = str(exc)
        else:
            fits[(k1, k2)] = fit
            row.update(
                log_likelihood=fit.log_likelihood,
                bic=bic(k1, k2, obs.M, fit.log_likelihood),
                converged=fit.converged,
            )
        table.append(row)
    scored = [r for r in table if r["bic"] is not None]
    if not scored:
        raise SelectionError("every bandwidth fit failed")
    winner = min(scored, key=lambda r: (r["bic"], r["K1"] * r["K2"], r["K1"]))
    return fits[(winner["K1"], winner["K2"])], table
