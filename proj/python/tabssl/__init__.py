"""Python bindings for the tabssl library."""

from ._tabssl import (
    Config,
    Error,
    Model,
    cosine_similarity,
    elbo_loss,
    evaluate,
    gaussian_kl,
    gradcheck,
    info_nce,
    info_nce_from_similarities,
    kfold,
    log_sum_exp,
    make_blobs,
    pretrain,
    recon_nll,
    run_ablation,
    run_pipeline,
    run_sweep,
    smote,
    split_indices,
)

__all__ = [
    "Config",
    "Error",
    "Model",
    "cosine_similarity",
    "elbo_loss",
    "evaluate",
    "gaussian_kl",
    "gradcheck",
    "info_nce",
    "info_nce_from_similarities",
    "kfold",
    "log_sum_exp",
    "make_blobs",
    "pretrain",
    "recon_nll",
    "run_ablation",
    "run_pipeline",
    "run_sweep",
    "smote",
    "split_indices",
]
