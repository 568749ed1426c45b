"""Homoscedastic aleatoric-uncertainty losses: Bayesian Smooth L1 and Bayesian Focal."""

from hal_loss.losses import (
    LossEval,
    LossParams,
    bayesian_focal,
    bayesian_l2,
    bayesian_smooth_l1,
    boltzmann_softmax_nll,
    focal,
    kendall_gal_multitask,
    multitask_loss,
    smooth_l1,
)
from hal_loss.scalar_math import erfc_stable, laplace_rate_alpha, sigma_from_log_variance, tau

__all__ = [
    "LossEval",
    "LossParams",
    "bayesian_focal",
    "bayesian_l2",
    "bayesian_smooth_l1",
    "boltzmann_softmax_nll",
    "erfc_stable",
    "focal",
    "kendall_gal_multitask",
    "laplace_rate_alpha",
    "multitask_loss",
    "sigma_from_log_variance",
    "smooth_l1",
    "tau",
]
