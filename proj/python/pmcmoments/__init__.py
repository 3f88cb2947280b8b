"""Alignment scores of pairwise Markov chains: models, LCS kernels,
exact checks and moment bounds."""

from ._core import (
    ConfigError,
    Error,
    TransitionMatrix,
    __version__,
    build_ind,
    build_max,
    build_min,
    build_uniform,
    estimate_eps_o,
    lcs,
    lcs_fast,
    lower_bound_report,
    model,
    run_em,
    run_em_combined,
    sample_chain,
    score,
    stationary,
    upper_bound_report,
    verify_A3,
    verify_combined_A3,
)

__all__ = [
    "ConfigError",
    "Error",
    "TransitionMatrix",
    "__version__",
    "build_ind",
    "build_max",
    "build_min",
    "build_uniform",
    "estimate_eps_o",
    "lcs",
    "lcs_fast",
    "lower_bound_report",
    "model",
    "run_em",
    "run_em_combined",
    "sample_chain",
    "score",
    "stationary",
    "upper_bound_report",
    "verify_A3",
    "verify_combined_A3",
]
