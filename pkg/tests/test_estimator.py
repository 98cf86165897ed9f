import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ggsp_mht import GraphSignalFDR
from ggsp_mht.detection import compute_lfdr_vector, select_eta
from ggsp_mht.exceptions import InvalidInputError
from ggsp_mht.graph import ring_graph
from ggsp_mht.simulation import ScenarioConfig, generate_observations

SC = ScenarioConfig(ring_graph(8), [[9.0, 4.0, -6.0], [6.0, -5.0, 3.0]], T=40)
OBS = generate_observations(SC, 21)
X = np.column_stack([OBS.vertices, OBS.times])


@pytest.fixture(scope="module")
def fitted():
    return GraphSignalFDR(SC.graph, alpha=0.1, n_graph_components=2, n_time_components=3).fit(X, OBS.pvalues)


def test_params_round_trip():
    est = GraphSignalFDR(SC.graph, alpha=0.2, box_bound=5.0)
    params = est.get_params()
    assert params["alpha"] == 0.2 and params["box_bound"] == 5.0
    twin = clone(est)
    assert twin.get_params()["alpha"] == 0.2
    est.set_params(alpha=0.05)
    assert est.alpha == 0.05


def test_fitted_attributes(fitted):
    assert fitted.coef_.shape == (2, 3)
    assert np.all(np.abs(fitted.coef_) <= 10.0)
    assert fitted.labels_.shape == (OBS.M,)
    assert fitted.bic_table_ is None
    assert fitted.labels_.sum() > 0 and not fitted.none_rejected_


def test_consistent_with_functional_api(fitted):
    lf = compute_lfdr_vector(fitted.coef_, OBS, fitted.basis_)
    np.testing.assert_allclose(fitted.lfdr_, lf, rtol=1e-14)
    assert fitted.threshold_ == select_eta(lf, 0.1)
    np.testing.assert_array_equal((OBS.pvalues <= fitted.p_thresholds_).astype(np.int8), fitted.labels_)


def test_predict_on_training_batch(fitted):
    np.testing.assert_array_equal(fitted.predict(X, OBS.pvalues), fitted.labels_)
    np.testing.assert_allclose(fitted.local_fdr(X, OBS.pvalues), fitted.lfdr_)
    pi0 = fitted.predict_pi0(X)
    assert np.all((pi0 >= 0) & (pi0 <= 1))
    assert fitted.score(X, OBS.pvalues) == pytest.approx(fitted.log_likelihood_ / OBS.M)


def test_bic_selection():
    est = GraphSignalFDR(SC.graph, bic_grid=[(1, 1), (2, 3)], n_restarts=2).fit(X, OBS.pvalues)
    assert len(est.bic_table_) == 2
    assert (est.n_graph_components_, est.n_time_components_) in [(1, 1), (2, 3)]


def test_deterministic():
    a = GraphSignalFDR(SC.graph, n_graph_components=2, n_time_components=3, random_state=4).fit(X, OBS.pvalues)
    b = clone(a).fit(X, OBS.pvalues)
    assert a.coef_.tobytes() == b.coef_.tobytes()


def test_not_fitted():
    with pytest.raises(NotFittedError):
        GraphSignalFDR(SC.graph).predict(X, OBS.pvalues)


@pytest.mark.parametrize(
    "Xbad",
    [X[:, :1], np.column_stack([X[:, 0] + 0.5, X[:, 1]]), np.column_stack([X[:, 0] + 8, X[:, 1]])],
)
def test_bad_samples(Xbad):
    with pytest.raises(InvalidInputError):
        GraphSignalFDR(SC.graph, n_graph_components=1, n_time_components=1).fit(Xbad, OBS.pvalues)


def test_bad_alpha_and_graph():
    with pytest.raises(InvalidInputError):
        GraphSignalFDR(SC.graph, alpha=1.5).fit(X, OBS.pvalues)
    with pytest.raises(InvalidInputError):
        GraphSignalFDR().fit(X, OBS.pvalues)


def test_length_mismatch():
    with pytest.raises(ValueError):
        GraphSignalFDR(SC.graph, n_graph_components=1, n_time_components=1).fit(X, OBS.pvalues[:-1])


def test_adjacency_matrix_accepted():
    est = GraphSignalFDR(SC.graph.adjacency, n_graph_components=1, n_time_components=1).fit(X, OBS.pvalues)
    assert est.coef_.shape == (1, 1)
