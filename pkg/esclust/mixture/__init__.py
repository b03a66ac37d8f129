from .engines import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL_ASE,
    DEFAULT_TOL_LSE,
    CurvedGmmEngine,
    EsAseEngine,
    EsLseEngine,
    FullGmmEngine,
    MixtureEngine,
    ase_component_covariances,
    cluster_assign,
    e_step,
    es_ase_iteration,
    es_lse_iteration,
    initial_state,
    kmeans_initial_state,
    lse_component_covariances,
    m_step_full_gmm,
    mixture_log_likelihood,
    parameter_count,
    run_to_convergence,
    s_step_cgmm,
    write_state,
)
from .gaussian import component_log_densities, gaussian_log_density
from .kmeans import KMeansResult, kmeans
from .state import MixtureState, Responsibilities, RunReport
