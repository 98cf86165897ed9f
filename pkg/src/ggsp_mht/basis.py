"""Temporal trigonometric basis and bandlimited signals on the graph x time domain.

The temporal basis on [-pi, pi] is ordered by increasing frequency::

    psi_1 = 1/sqrt(2 pi),  psi_{2k} = cos(k t)/sqrt(pi),  psi_{2k+1} = sin(k t)/sqrt(pi)

so truncating at an odd ``K2`` keeps complete cos/sin pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, InvalidInputError
from .graph import SpectralBasis

_SQRT_PI = math.sqrt(math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
# slack for round-off when a time lands exactly on an endpoint
_T_EPS = 1e-12


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(np.abs(t) > math.pi + _T_EPS):
        raise DomainError("time must lie in [-pi, pi]")
    return t


def temporal_basis_eval(j: int, t):
    """Value of the ``j``-th (1-based) temporal basis function at ``t``."""
    if int(j) != j or j < 1:
        raise InvalidInputError(f"basis index must be >= 1, got {j!r}")
    t = _check_time(t)
    if j == 1:
        out = np.full_like(t, 1.0 / _SQRT_2PI)
    else:
        freq = j // 2
        trig = np.cos if j % 2 == 0 else np.sin
        out = trig(freq * t) / _SQRT_PI
    return float(out) if out.ndim == 0 else out


def temporal_basis_matrix(t, n_components: int) -> np.ndarray:
    """Matrix with entry ``[m, j-1] = psi_j(t[m])`` for ``j = 1..n_components``."""
    if int(n_components) != n_components or n_components < 1:
        raise InvalidInputError(f"temporal bandwidth must be >= 1, got {n_components!r}")
    t = _check_time(np.atleast_1d(t))
    out = np.empty((t.shape[0], n_components))
    out[:, 0] = 1.0 / _SQRT_2PI
    for j in range(2, n_components + 1):
        freq = j // 2
        trig = np.cos if j % 2 == 0 else np.sin
        out[:, j - 1] = trig(freq * t) / _SQRT_PI
    return out


@dataclass(frozen=True)
class TemporalBasis:
    """Trigonometric basis of L2[-pi, pi] truncated to ``n_components`` functions."""

    n_components: int

    def __post_init__(self):
        if int(self.n_components) != self.n_components or self.n_components < 1:
            raise InvalidInputError("temporal bandwidth must be a positive integer")

    def __call__(self, t) -> np.ndarray:
        return temporal_basis_matrix(t, self.n_components)


@dataclass(frozen=True)
class TimeWindow:
    """Raw-time interval mapped affinely onto [-pi, pi]."""

    t_start: float
    t_end: float

    def __post_init__(self):
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise InvalidInputError("time window bounds must be finite")
        if not self.t_end > self.t_start:
            raise InvalidInputError("time window needs t_end > t_start")


def time_normalize(raw, window: TimeWindow):
    """Map raw times in ``[t_start, t_end]`` onto ``[-pi, pi]``."""
    raw = np.asarray(raw, dtype=float)
    width = window.t_end - window.t_start
    slack = _T_EPS * max(1.0, abs(width))
    if np.any(raw < window.t_start - slack) or np.any(raw > window.t_end + slack):
        raise DomainError(f"time outside window [{window.t_start}, {window.t_end}]")
    t = np.clip(-math.pi + 2.0 * math.pi * (raw - window.t_start) / width, -math.pi, math.pi)
    return float(t) if t.ndim == 0 else t


def time_denormalize(t, window: TimeWindow):
    """Inverse of :func:`time_normalize`."""
    t = _check_time(t)
    raw = window.t_start + (t + math.pi) / (2.0 * math.pi) * (window.t_end - window.t_start)
    return float(raw) if np.ndim(raw) == 0 else raw


@dataclass(frozen=True)
class CoefficientMatrix:
    """Fourier coefficients of a bandlimited signal, constrained to ``[-B, B]``."""

    xi: np.ndarray
    box_bound: float = 10.0

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float)
        if xi.ndim != 2 or 0 in xi.shape:
            raise InvalidInputError("coefficient matrix must be 2-D and non-empty")
        if not self.box_bound > 0:
            raise InvalidInputError("box bound must be positive")
        if np.any(np.abs(xi) > self.box_bound):
            raise InvalidInputError("coefficients outside the box [-B, B]")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)

    @property
    def shape(self):
        return self.xi.shape


def _as_xi(xi) -> np.ndarray:
    if isinstance(xi, CoefficientMatrix):
        return xi.xi
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 2:
        raise InvalidInputError("coefficient matrix must be 2-D")
    return xi


def _as_phi(phi) -> np.ndarray:
    return phi.eigenvectors if isinstance(phi, SpectralBasis) else np.asarray(phi, dtype=float)


def design_factors(vertices, times, phi, n_temporal: int):
    """Per-sample graph and temporal basis rows, shapes ``(M, K1)`` and ``(M, K2)``."""
    phi = _as_phi(phi)
    vertices = np.asarray(vertices)
    if vertices.size and (
        not np.issubdtype(vertices.dtype, np.integer)
        or vertices.min() < 0
        or vertices.max() >= phi.shape[0]
    ):
        raise InvalidInputError("vertex index out of range")
    return phi[vertices], temporal_basis_matrix(times, n_temporal)


def gamma_from_factors(xi, graph_rows: np.ndarray, time_rows: np.ndarray) -> np.ndarray:
    xi = _as_xi(xi)
    if xi.shape != (graph_rows.shape[1], time_rows.shape[1]):
        raise InvalidInputError(
            f"coefficient shape {xi.shape} does not match bandwidths "
            f"({graph_rows.shape[1]}, {time_rows.shape[1]})"
        )
    return np.einsum("mi,ij,mj->m", graph_rows, xi, time_rows)


def gamma_values(xi, vertices, times, phi) -> np.ndarray:
    """Vectorized bandlimited signal at samples ``(vertices[m], times[m])``.

    ``phi`` must already be truncated to the graph bandwidth ``K1``; the
    temporal bandwidth is read from the coefficient matrix.
    """
    xi = _as_xi(xi)
    g, h = design_factors(vertices, times, phi, xi.shape[1])
    return gamma_from_factors(xi, g, h)


def evaluate_gamma(xi, v: int, t: float, phi, psi: TemporalBasis) -> float:
    """Bandlimited signal ``sum_{k1,k2} xi[k1,k2] phi_k1(v) psi_k2(t)`` at one point."""
    xi = _as_xi(xi)
    phi = _as_phi(phi)
    if xi.shape != (phi.shape[1], psi.n_components):
        raise InvalidInputError(
            f"coefficient shape {xi.shape} does not match bandwidths "
            f"({phi.shape[1]}, {psi.n_components})"
        )
    if not 0 <= int(v) < phi.shape[0]:
        raise InvalidInputError(f"vertex index {v} out of range")
    return float(phi[int(v)] @ xi @ psi(t)[0])
