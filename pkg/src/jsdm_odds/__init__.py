"""Spatial joint species distribution modeling with interpretable
pairwise dependence summaries: odds-ratio and joint-occurrence surfaces,
richness moments, and ordinal-table odds ratios.

The latent model is a dimension-reduced multivariate probit: species
share a low-rank covariance built from factor loadings, and the factors
ride on spatial Gaussian processes, so every species pair carries an
odds-ratio surface over the study region.
"""

from .errors import DomainError, IngestError, JsdmError, NumericalError, StructuralError
from .inference import (
    RichnessSummary,
    SurfaceGrid,
    homogeneity_odds,
    krige_factors,
    make_grid,
    odds_surface,
    pair_table_draws,
    richness_stats,
)
from .model import (
    ModelParams,
    PresenceData,
    SpeciesCovariance,
    assemble_sigma_star,
    default_phi,
    exp_covariance,
    linear_predictor,
    pair_latent_params,
)
from .ordinal import (
    OrdinalTable,
    cumulative_odds,
    global_odds,
    local_odds,
    ordinal_table_from_gaussian,
)
from .prob_core import (
    BvnParams,
    bvn_cdf,
    cell_probs,
    log10_odds_ratio_bvn,
    log_bvn_cdf,
    log_cell_probs,
    sample_truncated_normal,
    std_normal_cdf,
    std_normal_quantile,
)
from .sampler import ChainConfig, ChainState, PosteriorDraws, init_chain, run
from .simulate import simulate_community, true_odds_surface
from .tables import PairTable, classify_dependence, log10_odds_ratio, odds_ratio, renormalize

__version__ = "0.1.0"

__all__ = [
    "BvnParams", "PairTable", "OrdinalTable", "PresenceData", "ModelParams",
    "SpeciesCovariance", "ChainConfig", "ChainState", "PosteriorDraws",
    "SurfaceGrid", "RichnessSummary",
    "std_normal_cdf", "std_normal_quantile", "bvn_cdf", "log_bvn_cdf",
    "cell_probs", "log_cell_probs", "log10_odds_ratio_bvn",
    "sample_truncated_normal",
    "odds_ratio", "log10_odds_ratio", "classify_dependence", "renormalize",
    "linear_predictor", "assemble_sigma_star", "pair_latent_params",
    "exp_covariance", "default_phi",
    "init_chain", "run",
    "simulate_community", "true_odds_surface",
    "pair_table_draws", "odds_surface", "krige_factors", "richness_stats",
    "homogeneity_odds", "make_grid",
    "local_odds", "global_odds", "cumulative_odds", "ordinal_table_from_gaussian",
    "JsdmError", "DomainError", "StructuralError", "IngestError", "NumericalError",
]
