from .limit_covariance import (
    AseLimitParams,
    CovarianceDiagnostics,
    LseLimitParams,
    ase_covariance,
    ase_covariances,
    ase_delta,
    ase_limit_params,
    asymmetry,
    bernoulli_variances,
    empirical_moments,
    lse_covariance,
    lse_covariances,
    lse_delta_tilde,
    lse_limit_params,
    lse_mu,
    lse_scaled_mean,
    lse_scaled_means,
)
