"""Scikit-learn style front end for local-fdr detection over graph x time samples."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted, column_or_1d

from .basis import gamma_values
from .detection import NONE_REJECTED, decide, p_thresholds, select_eta
from .estimation import (
    ObservationSet,
    OptimizerConfig,
    default_bic_grid,
    log_likelihood,
    mle_fit,
    select_model,
)
from .exceptions import InvalidInputError
from .graph import Graph, graph_fourier_basis, laplacian
from .model import UNIFORM, lfdr, pi0_from_mix


def _check_samples(X, n_vertices):
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != 2:
        raise InvalidInputError(f"X must have 2 columns (vertex, time), got {X.shape[1]}")
    v = X[:, 0]
    if np.any(v != np.round(v)) or np.any(v < 0) or np.any(v >= n_vertices):
        raise InvalidInputError("first column of X must hold valid vertex indices")
    return v.astype(np.int64), X[:, 1]


class GraphSignalFDR(BaseEstimator):
    """Local-fdr multiple testing with a bandlimited graph x time prior.

    Each sample is a row ``[vertex index, time in [-pi, pi]]`` of ``X`` with
    its p-value in ``p``. Fitting estimates the signal coefficients by
    maximum likelihood (choosing the bandwidths by BIC unless both are
    given), then thresholds the estimated local fdr at level ``alpha``.

    Parameters
    ----------
    graph : Graph or array-like of shape (n, n)
        Sensor graph, or its binary adjacency matrix.
    alpha : float, default=0.1
        Target false discovery rate.
    n_graph_components, n_time_components : int or None
        Bandwidths ``K1`` and ``K2``. If either is None, both are selected by
        BIC over ``bic_grid``.
    bic_grid : list of (int, int) or None
        Candidate ``(K1, K2)`` pairs; the default covers ``K1 <= min(6, n)``
        and ``K2 in {1, 3, 5, 7, 9}``.
    box_bound : float, default=10.0
        Coefficients are constrained to ``[-box_bound, box_bound]``.
    null : UniformNull or TabulatedNull, optional
        Null p-value density; uniform by default.
    step_init, backtrack, armijo_c, max_iter, tol, n_restarts
        Projected gradient ascent settings.
    random_state : int, RandomState or None
        Seeds the random restarts.

    Attributes
    ----------
    coef_ : ndarray of shape (K1, K2)
    basis_ : SpectralBasis
    lfdr_ : ndarray of shape (n_samples,)
        Local fdr of the training samples.
    threshold_ : float or NONE_REJECTED
    labels_ : ndarray of shape (n_samples,)
        Training decisions, 1 for rejected nulls.
    p_thresholds_ : ndarray of shape (n_samples,)
    bic_table_ : list of dict or None
    """

    def __init__(
        self,
        graph=None,
        alpha=0.1,
        n_graph_components=None,
        n_time_components=None,
        bic_grid=None,
        box_bound=10.0,
        null=None,
        step_init=1.0,
        backtrack=0.5,
        armijo_c=1e-4,
        max_iter=500,
        tol=1e-6,
        n_restarts=5,
        random_state=0,
    ):
        self.graph = graph
        self.alpha = alpha
        self.n_graph_components = n_graph_components
        self.n_time_components = n_time_components
        self.bic_grid = bic_grid
        self.box_bound = box_bound
        self.null = null
        self.step_init = step_init
        self.backtrack = backtrack
        self.armijo_c = armijo_c
        self.max_iter = max_iter
        self.tol = tol
        self.n_restarts = n_restarts
        self.random_state = random_state

    def _graph(self):
        if self.graph is None:
            raise InvalidInputError("a graph is required")
        return self.graph if isinstance(self.graph, Graph) else Graph(np.asarray(self.graph))

    def _null(self):
        return UNIFORM if self.null is None else self.null

    def _seed(self):
        if isinstance(self.random_state, (int, np.integer)):
            return int(self.random_state)
        return int(check_random_state(self.random_state).randint(np.iinfo(np.int32).max))

    def _obs(self, X, p):
        v, t = _check_samples(X, self.basis_.eigenvectors.shape[0])
        p = column_or_1d(p)
        check_consistent_length(v, p)
        return ObservationSet(v, t, p)

    def fit(self, X, p):
        if not 0 < self.alpha < 1:
            raise InvalidInputError("alpha must lie in (0, 1)")
        g = self._graph()
        self.basis_ = graph_fourier_basis(laplacian(g))
        obs = self._obs(X, p)
        cfg = OptimizerConfig(
            step_init=self.step_init, backtrack=self.backtrack, armijo_c=self.armijo_c,
            max_iters=self.max_iter, grad_tol=self.tol, restarts=self.n_restarts,
        )
        seed = self._seed()
        if self.n_graph_components is not None and self.n_time_components is not None:
            fit = mle_fit(obs, self.basis_, self.n_time_components, K1=self.n_graph_components,
                          box_bound=self.box_bound, config=cfg, seed=seed)
            self.bic_table_ = None
        else:
            grid = self.bic_grid if self.bic_grid is not None else default_bic_grid(g.n_vertices)
            fit, self.bic_table_ = select_model(obs, self.basis_, grid, box_bound=self.box_bound,
                                                config=cfg, seed=seed)
        self.fit_result_ = fit
        self.coef_ = fit.xi.copy()
        self.n_graph_components_ = fit.K1
        self.n_time_components_ = fit.K2
        self.log_likelihood_ = fit.log_likelihood
        self.converged_ = fit.converged
        self.n_iter_ = fit.iterations
        self.n_features_in_ = 2

        gam = self._gamma(obs)
        self.lfdr_ = np.atleast_1d(lfdr(obs.pvalues, gam, self._null()))
        self.threshold_ = select_eta(self.lfdr_, self.alpha)
        self.labels_ = decide(self.lfdr_, self.threshold_)
        self.p_thresholds_ = p_thresholds(self.threshold_, gam, self._null())
        return self

    def _gamma(self, obs):
        return gamma_values(self.coef_, obs.vertices, obs.times,
                            self.basis_.eigenvectors[:, : self.n_graph_components_])

    def gamma(self, X):
        """Estimated signal at each sample point."""
        check_is_fitted(self, "coef_")
        v, t = _check_samples(X, self.basis_.eigenvectors.shape[0])
        return gamma_values(self.coef_, v, t, self.basis_.eigenvectors[:, : self.n_graph_components_])

    def predict_pi0(self, X):
        """Estimated prior probability that each sample's null hypothesis holds."""
        return np.atleast_1d(pi0_from_mix(self.gamma(X), self._null()))

    def local_fdr(self, X, p):
        """Estimated local fdr of samples ``X`` with p-values ``p``."""
        check_is_fitted(self, "coef_")
        obs = self._obs(X, p)
        return np.atleast_1d(lfdr(obs.pvalues, self._gamma(obs), self._null()))

    def predict(self, X, p):
        """Decisions for a batch, with the threshold re-selected on that batch."""
        lf = self.local_fdr(X, p)
        return decide(lf, select_eta(lf, self.alpha))

    def fit_predict(self, X, p):
        return self.fit(X, p).labels_

    def score(self, X, p):
        """Mean log-likelihood per sample under the fitted signal."""
        check_is_fitted(self, "coef_")
        obs = self._obs(X, p)
        return log_likelihood(self.coef_, obs, self.basis_.eigenvectors) / obs.M

    @property
    def none_rejected_(self) -> bool:
        check_is_fitted(self, "threshold_")
        return self.threshold_ is NONE_REJECTED
