"""Inhomogeneous two-groups model with the Beta-sigmoid mixture family.

Given a signal value ``gamma`` at a sample point, the p-value mixture density
is ``f_mix(p) = a p^(a-1)`` with ``a = sigmoid(gamma)``. The null prior and
alternative density are recovered from ``f_mix`` and a known null density
``f0``::

    pi0 = f_mix(1) / f0(1)
    f1  = (f_mix - pi0 f0) / (1 - pi0)
    lfdr(p) = pi0 f0(p) / f_mix(p)

For a uniform null, ``pi0 = a`` and ``lfdr(p) = a / (a p^(a-1)) = p^(1-a)``.
In general ``lfdr(p) = f0(p) p^(1-a) / f0(1)``, which is how it is computed.
All functions broadcast over array arguments.
"""

from __future__ import annotations

import logging

import numpy as np

from .exceptions import (
    DegenerateMixtureError,
    DomainError,
    IdentifiabilityError,
    InvalidInputError,
)

logger = logging.getLogger(__name__)

P_FLOOR = 1e-15
_DEGENERATE_TOL = 1e-12


def sigmoid(x):
    """Logistic function, evaluated on the branch that cannot overflow."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out) if out.ndim == 0 else out


def log_sigmoid(x):
    """``log(sigmoid(x))`` without underflow for very negative ``x``."""
    out = -np.logaddexp(0.0, -np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def clamp_pvalues(p) -> np.ndarray:
    """Validate p-values and lift exact zeros to ``P_FLOOR`` with a warning."""
    p = np.array(p, dtype=float, ndmin=1)
    bad = ~np.isfinite(p) | (p < 0) | (p > 1)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise InvalidInputError(f"p-value at index {i} is {p[i]!r}, outside [0, 1]")
    zeros = p < P_FLOOR
    if np.any(zeros):
        logger.warning("clamped %d p-values below %g", int(zeros.sum()), P_FLOOR)
        p[zeros] = P_FLOOR
    return p


def _check_p(p):
    p = np.asarray(p, dtype=float)
    if np.any(~(p > 0)) or np.any(p > 1):
        raise DomainError("p-value must lie in (0, 1]")
    return p


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


class UniformNull:
    """Uniform null p-value density on [0, 1]."""

    kind = "uniform"

    def pdf(self, p):
        return _out(np.ones_like(np.asarray(p, dtype=float)))

    def cdf(self, p):
        return _out(np.clip(np.asarray(p, dtype=float), 0.0, 1.0))

    def ppf(self, u):
        return _out(np.asarray(u, dtype=float))

    @property
    def at_one(self) -> float:
        return 1.0

    def __repr__(self):
        return "UniformNull()"

    def __eq__(self, other):
        return isinstance(other, UniformNull)

    def __hash__(self):
        return hash(UniformNull)


class TabulatedNull:
    """Null density given on a grid over [0, 1] and linearly interpolated.

    The table must start at ``p = 0``, end at ``p = 1``, be non-negative and
    non-decreasing, and integrate to one within 1e-6. Tables violating
    monotonicity are rejected rather than repaired.
    """

    kind = "tabulated"

    def __init__(self, p, density):
        p = np.asarray(p, dtype=float)
        d = np.asarray(density, dtype=float)
        if p.ndim != 1 or p.shape != d.shape or p.size < 2:
            raise InvalidInputError("null table needs matching 1-D grids of length >= 2")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(d))):
            raise InvalidInputError("null table must be finite")
        if p[0] != 0.0 or p[-1] != 1.0 or np.any(np.diff(p) <= 0):
            raise InvalidInputError("null grid must increase strictly from 0 to 1")
        if np.any(d < 0):
            raise InvalidInputError("null density must be non-negative")
        if np.any(np.diff(d) < 0):
            raise InvalidInputError("null density must be non-decreasing in p")
        # trapezoid is exact for a piecewise-linear density
        seg = np.diff(p) * (d[1:] + d[:-1]) / 2.0
        total = float(seg.sum())
        if abs(total - 1.0) > 1e-6:
            raise InvalidInputError(f"null density integrates to {total}, not 1")
        if d[-1] <= 0:
            raise IdentifiabilityError("null density vanishes at p = 1")
        self.grid = p
        self.density = d
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])

    def pdf(self, p):
        return _out(np.interp(p, self.grid, self.density))

    def cdf(self, p):
        p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
        i = np.clip(np.searchsorted(self.grid, p, side="right") - 1, 0, self.grid.size - 2)
        x0 = self.grid[i]
        d0 = self.density[i]
        slope = (self.density[i + 1] - d0) / (self.grid[i + 1] - x0)
        dx = p - x0
        return _out(self._cum[i] + d0 * dx + 0.5 * slope * dx * dx)

    def ppf(self, u, tol: float = 1e-12):
        u = np.asarray(u, dtype=float)
        lo = np.zeros_like(u)
        hi = np.ones_like(u)
        while np.max(hi - lo, initial=0.0) > tol:
            mid = 0.5 * (lo + hi)
            below = np.asarray(self.cdf(mid)) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return _out(0.5 * (lo + hi))

    @property
    def at_one(self) -> float:
        return float(self.density[-1])

    def __repr__(self):
        return f"TabulatedNull(<{self.grid.size} points>)"


UNIFORM = UniformNull()


def f_mix(p, gamma):
    """Mixture density ``a p^(a-1)`` with ``a = sigmoid(gamma)``."""
    p = _check_p(p)
    a = sigmoid(gamma)
    return _out(a * np.exp((a - 1.0) * np.log(p)))


def log_f_mix(p, gamma):
    p = _check_p(p)
    a = sigmoid(gamma)
    return _out(log_sigmoid(gamma) + (a - 1.0) * np.log(p))


def pi0_from_mix(gamma, null=UNIFORM):
    """Null prior ``f_mix(1) / f0(1)``; equals ``sigmoid(gamma)`` for a uniform null."""
    f0_one = null.at_one
    if not f0_one > 0:
        raise IdentifiabilityError("f0(1) = 0: null prior is not identifiable")
    return _out(np.asarray(sigmoid(gamma)) / f0_one)


def _one_minus_pi0(gamma, null):
    if isinstance(null, UniformNull):
        # 1 - sigmoid(g) == sigmoid(-g), exact even when a rounds to 1
        return np.asarray(sigmoid(-np.asarray(gamma, dtype=float)))
    return 1.0 - np.asarray(pi0_from_mix(gamma, null))


def f1_from_mix(p, gamma, null=UNIFORM):
    """Alternative density ``(f_mix - pi0 f0) / (1 - pi0)``."""
    p = _check_p(p)
    q = _one_minus_pi0(gamma, null)
    if np.any(q <= _DEGENERATE_TOL):
        raise DegenerateMixtureError("null prior is 1: alternative density undefined")
    pi0 = np.asarray(pi0_from_mix(gamma, null))
    return _out((np.asarray(f_mix(p, gamma)) - pi0 * np.asarray(null.pdf(p))) / q)


def f1_cdf(p, gamma, null=UNIFORM):
    """Alternative CDF ``(p^a - pi0 F0(p)) / (1 - pi0)`` on [0, 1]."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    q = _one_minus_pi0(gamma, null)
    if np.any(q <= 0):
        raise DegenerateMixtureError("null prior is 1: alternative CDF undefined")
    a = np.asarray(sigmoid(gamma))
    with np.errstate(divide="ignore", invalid="ignore"):
        if isinstance(null, UniformNull):
            # p^a - a p == p (expm1(-(1-a) ln p) + (1-a)); avoids cancellation as a -> 1.
            # Far from that regime the direct form is safe and cannot overflow.
            logp = np.log(np.where(p > 0, p, 1.0))
            x = -q * logp
            near = x < 1.0
            out = np.where(
                near,
                p * (np.expm1(np.where(near, x, 0.0)) + q) / q,
                (np.exp(a * logp) - a * p) / q,
            )
        else:
            pi0 = np.asarray(pi0_from_mix(gamma, null))
            out = (p**a - pi0 * np.asarray(null.cdf(p))) / q
    out = np.where(p > 0, out, 0.0)
    return _out(np.clip(out, 0.0, 1.0))


def lfdr(p, gamma, null=UNIFORM):
    """Local false discovery rate ``f0(p) p^(1-a) / f0(1)``, clipped to [0, 1]."""
    p = _check_p(p)
    one_minus_a = np.asarray(sigmoid(-np.asarray(gamma, dtype=float)))
    val = np.exp(one_minus_a * np.log(p))
    if not isinstance(null, UniformNull):
        val = val * np.asarray(null.pdf(p)) / null.at_one
    return _out(np.clip(val, 0.0, 1.0))


def lfdr_ratio(p, gamma, null=UNIFORM):
    """Local fdr from its definition ``pi0 f0(p) / f_mix(p)``, unsimplified."""
    p = _check_p(p)
    pi0 = np.asarray(pi0_from_mix(gamma, null))
    return _out(pi0 * np.asarray(null.pdf(p)) / np.asarray(f_mix(p, gamma)))
