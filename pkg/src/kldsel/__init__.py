"""Bias-reduced kernel density estimation, divergence estimates and
divergence-based model selection between Poisson and Geometric fits."""

__version__ = "0.1.0"

from .bandwidth import (
    BandwidthSelection,
    cv_objective,
    fixed_bandwidth,
    l2_norm_squared,
    mcv_objective,
    select_bandwidth,
)
from .binning import BinnedDistribution, CellPartition
from .density import DensityEstimate, bkde_at, bkde_loo_at, density_at, evaluate_on_grid, kde_at
from .divergence import DivergenceEstimate, kld_continuous, kld_discrete, mkld_ratio, threshold_epsilon
from .errors import DomainError, KldselError, NumericError, ParameterError
from .hypothesis import (
    TestResult,
    bootstrap_scale,
    decide,
    divergence_gradients,
    gof_statistic,
    kl_n_statistic,
    select_model,
)
from .kernels import effective_kernel_value, kernel_constants, kernel_second_derivative, kernel_value
from .models import (
    ParametricModel,
    bkde_cell_probs,
    default_partition,
    empirical_cell_freqs,
    fit_mle,
    kde_cell_probs,
    model_cell_probs,
    model_pmf,
)
from .simulate import (
    ExperimentConfig,
    ReplicationRecord,
    SelectionReport,
    mse_rate_experiment,
    run_experiment,
    run_replication,
    sample_mixture,
)
