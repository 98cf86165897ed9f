"""Sensor graphs, the Laplacian shift operator and its Fourier basis."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .exceptions import InvalidBandwidthError, InvalidInputError

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0088

_JACOBI_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 100
_SIGN_TOL = 1e-12


@dataclass(frozen=True)
class Graph:
    """Undirected, unweighted graph without self-loops.

    ``connected`` is computed on construction; a disconnected graph is
    allowed but logged, since its Laplacian has a repeated zero eigenvalue.
    """

    adjacency: np.ndarray
    vertex_ids: tuple = ()
    connected: bool = field(init=False)

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise InvalidInputError("adjacency must be a non-empty square matrix")
        if not np.all((a == 0) | (a == 1)):
            raise InvalidInputError("adjacency must be binary")
        if not np.array_equal(a, a.T):
            raise InvalidInputError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise InvalidInputError("graph must not have self-loops")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

        ids = tuple(self.vertex_ids) if len(self.vertex_ids) else tuple(range(a.shape[0]))
        if len(ids) != a.shape[0]:
            raise InvalidInputError(
                f"{len(ids)} vertex ids given for {a.shape[0]} vertices"
            )
        if len(set(ids)) != len(ids):
            raise InvalidInputError("vertex ids must be unique")
        object.__setattr__(self, "vertex_ids", ids)

        conn = _is_connected(a)
        object.__setattr__(self, "connected", conn)
        if not conn:
            logger.warning("graph with %d vertices is not connected", a.shape[0])

    @property
    def n_vertices(self) -> int:
        return self.adjacency.shape[0]

    def index_of(self, vertex_id) -> int:
        try:
            return self._id_index[vertex_id]
        except KeyError:
            raise InvalidInputError(f"unknown vertex id {vertex_id!r}") from None

    @property
    def _id_index(self) -> dict:
        return {v: i for i, v in enumerate(self.vertex_ids)}


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenpairs of a graph shift operator, eigenvalues ascending.

    Column ``k`` of ``eigenvectors`` is the k-th graph Fourier vector.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n_components(self) -> int:
        return self.eigenvectors.shape[1]


def _is_connected(adjacency: np.ndarray) -> bool:
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adjacency[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return bool(seen.all())


def haversine_matrix(coords) -> np.ndarray:
    """Pairwise great-circle distances in km for rows of ``(lat, lon)`` degrees."""
    c = np.radians(np.asarray(coords, dtype=float))
    lat = c[:, 0][:, None]
    lon = c[:, 1][:, None]
    dlat = lat - lat.T
    dlon = lon - lon.T
    h = np.sin(dlat / 2) ** 2 + np.cos(lat) * np.cos(lat.T) * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def build_knn_graph(coords, k: int = 3, vertex_ids: Sequence[Hashable] = ()) -> Graph:
    """Symmetrized k-nearest-neighbour graph under haversine distance.

    Each vertex is linked to its ``k`` nearest other vertices; the directed
    edge set is then symmetrized by union, so every degree is at least ``k``.
    Distance ties are broken by input order.

    Parameters
    ----------
    coords : array-like of shape (n, 2)
        Latitude and longitude in degrees.
    k : int
        Number of neighbours per vertex.
    vertex_ids : sequence, optional
        Labels for the vertices; defaults to ``range(n)``.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise InvalidInputError("coords must have shape (n, 2)")
    if not np.all(np.isfinite(coords)):
        raise InvalidInputError("coordinates must be finite")
    if int(k) != k or k < 1:
        raise InvalidInputError(f"k must be a positive integer, got {k!r}")
    n = coords.shape[0]
    if n < k + 1:
        raise InvalidInputError(f"need at least k+1={k + 1} points, got {n}")

    dist = haversine_matrix(coords)
    adj = np.zeros((n, n))
    for i in range(n):
        # stable sort keeps input order among equal distances
        order = np.argsort(dist[i], kind="stable")
        nbrs = [j for j in order if j != i][:k]
        adj[i, nbrs] = 1.0
    adj = np.maximum(adj, adj.T)
    return Graph(adj, vertex_ids=vertex_ids)


def graph_from_edges(edges, vertex_ids: Sequence[Hashable]) -> Graph:
    """Graph from an undirected edge list over the given vertex labels.

    Duplicate edges (in either orientation) and self-loops are rejected.
    """
    ids = list(vertex_ids)
    index = {v: i for i, v in enumerate(ids)}
    if len(index) != len(ids):
        raise InvalidInputError("vertex ids must be unique")
    adj = np.zeros((len(ids), len(ids)))
    for row, (src, dst) in enumerate(edges, start=1):
        if src not in index or dst not in index:
            missing = src if src not in index else dst
            raise InvalidInputError(f"edge {row}: unknown vertex id {missing!r}")
        i, j = index[src], index[dst]
        if i == j:
            raise InvalidInputError(f"edge {row}: self-loop on {src!r}")
        if adj[i, j]:
            raise InvalidInputError(f"edge {row}: duplicate edge {src!r}-{dst!r}")
        adj[i, j] = adj[j, i] = 1.0
    return Graph(adj, vertex_ids=ids)


def ring_graph(n: int) -> Graph:
    """Cycle graph on ``n >= 3`` vertices labelled ``0..n-1``."""
    if n < 3:
        raise InvalidInputError("a ring needs at least 3 vertices")
    adj = np.zeros((n, n))
    idx = np.arange(n)
    adj[idx, (idx + 1) % n] = 1.0
    adj = np.maximum(adj, adj.T)
    return Graph(adj)


def laplacian(g: Graph) -> np.ndarray:
    """Combinatorial Laplacian ``D - A``."""
    a = g.adjacency
    return np.diag(a.sum(axis=1)) - a


def jacobi_eigh(a, tol: float = _JACOBI_TOL, max_sweeps: int = _JACOBI_MAX_SWEEPS):
    """Eigendecomposition of a dense symmetric matrix by cyclic Jacobi rotations.

    Sweeps visit the upper-triangular pairs in row-major order until the
    off-diagonal Frobenius norm drops below ``tol`` (relative to the full
    norm when that exceeds one). Returns ``(eigenvalues, eigenvectors)``
    unsorted, with ``a @ v[:, k] == w[k] * v[:, k]``.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.triu(a, 1) ** 2)) * 2.0)
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        logger.warning("Jacobi did not reach tolerance in %d sweeps", max_sweeps)
    return np.diag(a).copy(), v


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for k in range(out.shape[1]):
        nz = np.flatnonzero(np.abs(out[:, k]) > _SIGN_TOL)
        if nz.size and out[nz[0], k] < 0:
            out[:, k] = -out[:, k]
    return out


def graph_fourier_basis(lap, n_components: int | None = None) -> SpectralBasis:
    """Graph Fourier basis of a symmetric shift operator, truncated to ``n_components``.

    Eigenvalues are sorted ascending (stable, so ties keep solver order) and
    each eigenvector's first entry with magnitude above 1e-12 is made positive.
    """
    lap = np.asarray(lap, dtype=float)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        raise InvalidInputError("shift operator must be square")
    if not np.allclose(lap, lap.T, rtol=0, atol=1e-12):
        raise InvalidInputError("shift operator must be symmetric")
    n = lap.shape[0]
    if n_components is None:
        n_components = n
    if int(n_components) != n_components or not 1 <= n_components <= n:
        raise InvalidBandwidthError(
            f"graph bandwidth must be in [1, {n}], got {n_components!r}"
        )
    w, v = jacobi_eigh((lap + lap.T) / 2.0)
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = _fix_signs(v[:, order])
    return SpectralBasis(w[:n_components].copy(), v[:, :n_components].copy())
