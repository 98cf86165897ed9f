"""Local-fdr thresholding, equivalent per-sample p-value thresholds, and BH."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import gamma_values
from .exceptions import InvalidInputError
from .model import UNIFORM, UniformNull, lfdr, sigmoid


class _NoneRejected:
    """Marker for an empty feasible set: no hypothesis is rejected."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NONE_REJECTED"

    def __reduce__(self):
        return (_NoneRejected, ())


NONE_REJECTED = _NoneRejected()


@dataclass(frozen=True)
class DetectionResult:
    lfdr_values: np.ndarray
    eta_hat: object
    decisions: np.ndarray
    p_thresholds: np.ndarray | None = None

    @property
    def n_rejected(self) -> int:
        return int(self.decisions.sum())

    @property
    def none_rejected(self) -> bool:
        return self.eta_hat is NONE_REJECTED


def compute_lfdr_vector(xi, obs, phi, null=UNIFORM) -> np.ndarray:
    """Estimated local fdr per sample, from the signal with coefficients ``xi``."""
    gam = gamma_values(xi, obs.vertices, obs.times, _phi(phi, xi))
    return np.atleast_1d(lfdr(obs.pvalues, gam, null))


def _phi(phi, xi):
    mat = getattr(phi, "eigenvectors", phi)
    k1 = np.shape(getattr(xi, "xi", xi))[0]
    return np.asarray(mat)[:, :k1]


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha!r}")


def select_eta(lfdr_values, alpha: float):
    """Largest observed lfdr value whose rejection set has mean lfdr <= alpha.

    The estimated FDR at threshold ``eta`` is the mean lfdr over samples with
    ``lfdr <= eta``. It only changes at observed values, so scanning the sorted
    values (at the end of each tie group) finds the largest feasible one.
    Returns :data:`NONE_REJECTED` when no threshold is feasible.
    """
    _check_alpha(alpha)
    vals = np.asarray(lfdr_values, dtype=float).ravel()
    if vals.size == 0:
        raise InvalidInputError("no lfdr values given")
    if np.any(~np.isfinite(vals)) or np.any(vals < 0) or np.any(vals > 1):
        raise InvalidInputError("lfdr values must lie in [0, 1]")
    s = np.sort(vals)
    running = np.cumsum(s) / np.arange(1, s.size + 1)
    group_end = np.append(s[1:] != s[:-1], True)
    ok = np.flatnonzero(group_end & (running <= alpha))
    if ok.size == 0:
        return NONE_REJECTED
    return float(s[ok[-1]])


def decide(lfdr_values, eta_hat) -> np.ndarray:
    """Reject (1) every sample with ``lfdr <= eta_hat``."""
    vals = np.asarray(lfdr_values, dtype=float).ravel()
    if eta_hat is NONE_REJECTED:
        return np.zeros(vals.shape, dtype=np.int8)
    return (vals <= eta_hat).astype(np.int8)


def p_thresholds(eta_hat, gammas, null=UNIFORM, tol: float = 1e-10) -> np.ndarray:
    """Per-sample p-value cut-offs on the lfdr level set ``lfdr(s_m; gamma_m) = eta_hat``.

    For a uniform null this is ``eta_hat ** (1 / (1 - a_m))``. For a tabulated
    null the level set is found by bisection, which is valid because the
    lfdr is non-decreasing in ``p``.
    """
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    if eta_hat is NONE_REJECTED:
        return np.zeros_like(gammas)
    if eta_hat >= 1.0:
        return np.ones_like(gammas)
    if isinstance(null, UniformNull):
        one_minus_a = np.asarray(sigmoid(-gammas))
        with np.errstate(divide="ignore", under="ignore"):
            s = np.exp(np.log(eta_hat) / one_minus_a)
        return _snap_to_level(s, eta_hat, gammas, null)
    lo = np.zeros_like(gammas)
    hi = np.ones_like(gammas)
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        below = np.asarray(lfdr(np.maximum(mid, 1e-300), gammas, null)) <= eta_hat
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return lo


def _lfdr_le(x, eta, gammas, null):
    # lfdr(0) is taken as 0, its limit from the right
    pos = x > 0
    out = np.ones_like(pos)
    if np.any(pos):
        out[pos] = np.asarray(lfdr(x[pos], gammas[pos], null)) <= eta
    return out


def _snap_to_level(s, eta, gammas, null):
    """Largest double ``x`` per sample with computed ``lfdr(x) <= eta``.

    The closed-form cut-off can be off by a few ulps after the power; snapping
    makes ``p <= s`` agree exactly with ``lfdr(p) <= eta`` in floating point.
    """
    one = np.float64(1.0).view(np.int64)
    lo = np.clip(s * (1 - 1e-6), 0.0, 1.0).view(np.int64)
    hi = np.clip(s * (1 + 1e-6), 0.0, 1.0).view(np.int64)
    # lfdr(1) = 1 > eta, so 1.0 is always an infeasible upper end
    bad = ~_lfdr_le(lo.view(np.float64), eta, gammas, null) | (
        (hi < one) & _lfdr_le(hi.view(np.float64), eta, gammas, null)
    )
    lo = np.where(bad, 0, lo)
    hi = np.where(bad, one, hi)
    while np.any(hi - lo > 1):
        mid = lo + (hi - lo) // 2
        ok = _lfdr_le(mid.view(np.float64), eta, gammas, null)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return lo.view(np.float64)


def detect(lfdr_values, alpha: float, gammas=None, null=UNIFORM) -> DetectionResult:
    """Threshold selection and decisions in one call."""
    vals = np.atleast_1d(np.asarray(lfdr_values, dtype=float))
    eta = select_eta(vals, alpha)
    s = None if gammas is None else p_thresholds(eta, gammas, null)
    return DetectionResult(vals, eta, decide(vals, eta), s)


def bh_procedure(p_values, alpha: float) -> np.ndarray:
    """Benjamini-Hochberg step-up decisions at level ``alpha``."""
    _check_alpha(alpha)
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size == 0:
        raise InvalidInputError("no p-values given")
    m = p.size
    s = np.sort(p)
    ok = np.flatnonzero(s <= alpha * np.arange(1, m + 1) / m)
    if ok.size == 0:
        return np.zeros(m, dtype=np.int8)
    return (p <= s[ok[-1]]).astype(np.int8)
