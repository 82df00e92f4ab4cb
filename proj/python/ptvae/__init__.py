"""Power-transformed VAE for synthetic mixed-type tabular data."""

from ._ptvae import (
    Dataset,
    PowerParams,
    PtvaeError,
    TransformModel,
    VaeModel,
    bimodality_coefficient,
    boxcox_forward,
    boxcox_inverse,
    default_sim_config,
    fit_lambda1,
    fit_lambda2,
    fit_power_params,
    fit_transform,
    kl_gauss,
    load_csv,
    pmse_ratio,
    power_forward,
    power_inverse,
    run_pipeline,
    save_csv,
    simulate,
    synthesize,
    train_vae,
    two_sigma_criterion,
)

__all__ = [name for name in dir() if not name.startswith("_")]
