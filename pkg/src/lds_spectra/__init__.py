"""Eigenvalues of linear dynamical systems from their outputs.

The autoregressive part of the ARMA(X) model implied by an LDS carries the
characteristic polynomial of its state-transition matrix. This package fits
those AR parameters by regularized iterated regression, turns them into
eigenvalue estimates with condition bounds, and clusters series by them.
"""
from ._accel import USE_JIT
from .arma_fit import (
    ArmaFit,
    FitConfig,
    ar_baseline_fit,
    fit_series,
    iterated_regression,
    iterated_regression_armax,
    ols_ar,
    ridge_ls,
)
from .cluster_eval import (
    KMeansResult,
    Labeling,
    adjusted_mutual_info,
    adjusted_rand,
    cluster_series,
    kmeans,
    v_measure,
)
from .eig_recovery import (
    SpectrumEstimate,
    ar_distance,
    convergence_study,
    correlation_study,
    estimate_spectrum,
    measured_sensitivity,
    perturbation_study,
)
from .errors import *  # noqa: F401,F403  (the exception hierarchy)
from .lds_core import (
    LdsParams,
    SyntheticBenchmark,
    TimeSeries,
    ar_rmse_bound,
    arma_representation,
    asymptotic_ar_covariance,
    change_of_basis,
    make_benchmark,
    random_identifiable_lds,
    random_stable_lds,
    simulate,
)
from .poly_spectra import (
    ConditionBounds,
    MonicPolynomial,
    Spectrum,
    ar_params_to_char_poly,
    char_poly_to_ar_params,
    companion_matrix,
    condition_bounds,
    poly_roots,
    spectrum_distance,
    vandermonde,
    vandermonde_inverse,
)

__version__ = "0.1.0"
