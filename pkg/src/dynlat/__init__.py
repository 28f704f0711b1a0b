"""Dynamic latent space models for binary networks: variational inference,
a parallel-tempering MCMC baseline, synthetic designs and evaluation metrics."""

from .model import (
    DynamicNetwork,
    Hyperparameters,
    LatentConfiguration,
    link_probability,
    log_joint,
    log_likelihood,
    log_prior_latent,
)
from .vb import (
    FitOptions,
    FitResult,
    NumericalDivergenceError,
    VariationalState,
    fit,
    init_mds,
    init_random,
    surrogate_objective,
)
from .mcmc import McmcOptions, McmcResult, procrustes_align, run_mcmc
from .simulate import SimDesign, preset_designs, sample_network
from .metrics import auc, beta_mse, distance_ratio_stats, in_sample_auc, movement_stats

__version__ = "0.1.0"
