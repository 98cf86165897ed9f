"""Multiple hypothesis testing over graph x time domains.

The null prior and alternative p-value density vary over the domain through
a bandlimited signal, fitted by maximum likelihood; decisions threshold the
resulting local false discovery rate.
"""

from .basis import (
    CoefficientMatrix,
    TemporalBasis,
    TimeWindow,
    evaluate_gamma,
    gamma_values,
    temporal_basis_eval,
    temporal_basis_matrix,
    time_denormalize,
    time_normalize,
)
from .detection import (
    NONE_REJECTED,
    DetectionResult,
    bh_procedure,
    compute_lfdr_vector,
    decide,
    detect,
    p_thresholds,
    select_eta,
)
from .estimation import (
    FitResult,
    ObservationSet,
    OptimizerConfig,
    bic,
    grad_log_likelihood,
    log_likelihood,
    mle_fit,
    select_model,
)
from .estimator import GraphSignalFDR
from .graph import (
    Graph,
    SpectralBasis,
    build_knn_graph,
    graph_fourier_basis,
    graph_from_edges,
    laplacian,
    ring_graph,
)
from .model import (
    UNIFORM,
    TabulatedNull,
    UniformNull,
    f1_from_mix,
    f_mix,
    lfdr,
    pi0_from_mix,
    sigmoid,
)
from .simulation import (
    ScenarioConfig,
    empirical_fdp_tpp,
    generate_observations,
    oracle_detect,
    run_benchmark,
)

__version__ = "0.1.0"
