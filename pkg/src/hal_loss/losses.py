"""Loss functions with homoscedastic log-variance and their closed-form gradients.

Every loss is written per sample. Inputs may be Python floats or numpy arrays
of error norms / true-class probabilities; the log-variance ``s`` is always a
scalar (one per task). Functions returning :class:`LossEval` give the value,
the derivative w.r.t. the prediction-side input, and the derivative w.r.t. s.

The regression loss switches branch at ``eps = 1/beta**2``. It is continuous
there but its slope jumps from ``1/(beta^2 sigma^2)`` to the Laplace rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from hal_loss import scalar_math as sm

ArrayLike = Union[float, np.ndarray]

P_EPS = 1e-7

DEFAULT_BETA = 1.0
DEFAULT_GAMMA = 2.0
DEFAULT_CLASS_WEIGHT = 1.0


@dataclass(frozen=True)
class LossParams:
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA
    s: float = 0.0

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ValueError(f"beta must be > 0, got {self.beta!r}")
        if not self.gamma >= 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma!r}")
        if not math.isfinite(self.s):
            raise ValueError(f"s must be finite, got {self.s!r}")

    @property
    def sigma(self) -> float:
        return sm.sigma_from_log_variance(self.s)

    @property
    def threshold(self) -> float:
        return 1.0 / (self.beta * self.beta)


@dataclass(frozen=True)
class LossEval:
    value: ArrayLike
    d_input: ArrayLike
    d_s: ArrayLike
    saturated: bool = False


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _as_eps(eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0.0):
        raise ValueError("error norm must be >= 0")
    return eps


def clamp_prob(p_t):
    return np.clip(np.asarray(p_t, dtype=float), P_EPS, 1.0 - P_EPS)


def reduce(ev: LossEval, reduction: str = "mean") -> LossEval:
    """Fold a batch of per-sample evaluations into one.

    ``d_input`` stays per-sample (scaled by 1/n for the mean) so it can be
    chained back through the model.
    """
    value = np.asarray(ev.value, dtype=float)
    n = value.size
    if reduction == "mean":
        scale = 1.0 / n if n else 0.0
    elif reduction == "sum":
        scale = 1.0
    else:
        raise ValueError(f"unknown reduction {reduction!r}")
    return LossEval(
        value=float(np.sum(value) * scale),
        d_input=np.asarray(ev.d_input, dtype=float) * scale,
        d_s=float(np.sum(np.asarray(ev.d_s, dtype=float)) * scale),
        saturated=ev.saturated,
    )


# ----------------------------------------------------------------------------
# Baselines
# ----------------------------------------------------------------------------


def smooth_l1(eps: ArrayLike, beta: float = DEFAULT_BETA) -> ArrayLike:
    """Huber-style loss with quadratic core below ``1/beta**2``."""
    eps = _as_eps(eps)
    b2 = beta * beta
    return _out(np.where(eps < 1.0 / b2, 0.5 * b2 * eps * eps, eps - 0.5 / b2))


def focal(p_t: ArrayLike, gamma: float = DEFAULT_GAMMA) -> ArrayLike:
    p_t = clamp_prob(p_t)
    return _out(-((1.0 - p_t) ** gamma) * np.log(p_t))


# ----------------------------------------------------------------------------
# Bayesian losses
# ----------------------------------------------------------------------------


def bayesian_l2(eps: ArrayLike, s: float) -> LossEval:
    """Gaussian negative log-likelihood ``eps^2 / (2 sigma^2) + log sigma``."""
    eps = _as_eps(eps)
    s = sm.clamp_log_variance(s)
    inv_var = math.exp(-s)
    half_sq = 0.5 * eps * eps * inv_var
    return LossEval(
        value=_out(half_sq + 0.5 * s),
        d_input=_out(eps * inv_var),
        d_s=_out(0.5 - half_sq),
    )


def bayesian_smooth_l1_branches(eps: ArrayLike, params: LossParams):
    """Both branch formulas evaluated everywhere (for continuity checks)."""
    eps = np.asarray(eps, dtype=float)
    s = sm.clamp_log_variance(params.s)
    sigma = math.exp(0.5 * s)
    inv_var = math.exp(-s)
    b2 = params.beta * params.beta
    rate = sm.laplace_rate(params.beta, sigma)
    log_t = -rate.alpha / b2
    inner = 0.5 * eps * eps * inv_var + 0.5 * s
    outer = -b2 * eps * log_t + log_t + 0.5 * inv_var / (b2 * b2) + 0.5 * s
    return _out(inner), _out(outer)


def bayesian_smooth_l1(eps: ArrayLike, params: LossParams = LossParams()) -> LossEval:
    """Gaussian core / Laplace tail regression loss with learned log-variance.

    Inner branch (eps < 1/beta^2): ``eps^2/(2 sigma^2) + log sigma``.
    Outer branch: ``-beta^2 eps log tau + log tau + 1/(2 sigma^2 beta^4) + log sigma``,
    where the last two terms make the loss continuous at the threshold.
    """
    eps = _as_eps(eps)
    s = sm.clamp_log_variance(params.s)
    sigma = math.exp(0.5 * s)
    inv_var = math.exp(-s)
    b2 = params.beta * params.beta
    rate = sm.laplace_rate(params.beta, sigma)
    alpha = rate.alpha
    log_t = -alpha / b2
    # a capped rate no longer moves with s
    dlog_t = 0.0 if rate.saturated else sm.dlog_tau_ds(params.beta, sigma)

    inner_mask = eps < 1.0 / b2
    half_sq = 0.5 * eps * eps * inv_var
    corr = 0.5 * inv_var / (b2 * b2)

    value = np.where(inner_mask, half_sq + 0.5 * s, alpha * eps + log_t + corr + 0.5 * s)
    d_eps = np.where(inner_mask, eps * inv_var, alpha)
    d_s = np.where(
        inner_mask,
        0.5 - half_sq,
        (1.0 - b2 * eps) * dlog_t - corr + 0.5,
    )
    return LossEval(_out(value), _out(d_eps), _out(d_s), rate.saturated)


def bayesian_focal(p_t: ArrayLike, params: LossParams = LossParams()) -> LossEval:
    """Focal loss with the true-class probability tempered by sigma.

    ``-[(1/sigma) (1 - p_t)^(1/sigma^2)]^gamma * (log(p_t)/sigma^2 - log sigma)``

    The whole bracket is raised to gamma, which makes sigma = 1 reproduce
    :func:`focal` bit for bit. Values can be negative when sigma < 1 and p_t
    is close to 1.
    """
    p_t = clamp_prob(p_t)
    gamma = params.gamma
    s = sm.clamp_log_variance(params.s)
    sigma = math.exp(0.5 * s)
    inv_var = math.exp(-s)
    log_sigma = 0.5 * s

    q = 1.0 - p_t
    log_p = np.log(p_t)
    log_q = np.log(q)
    prefactor = ((1.0 / sigma) * q**inv_var) ** gamma
    core = inv_var * log_p - log_sigma
    value = -prefactor * core

    d_pre_dp = -prefactor * gamma * inv_var / q
    d_core_dp = inv_var / p_t
    d_p = -(d_pre_dp * core + prefactor * d_core_dp)

    d_pre_ds = prefactor * gamma * (-0.5 - inv_var * log_q)
    d_core_ds = -inv_var * log_p - 0.5
    d_s = -(d_pre_ds * core + prefactor * d_core_ds)
    return LossEval(_out(value), _out(d_p), _out(d_s))


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + math.log(float(np.sum(np.exp(x - m))))


def boltzmann_softmax_nll(logits, c: int, s: float) -> LossEval:
    """Negative log of a softmax with temperature sigma^2 at class ``c``.

    ``d_input`` is the gradient w.r.t. the full logit vector.
    """
    f = np.asarray(logits, dtype=float)
    if f.ndim != 1 or f.size == 0:
        raise ValueError("logits must be a non-empty vector")
    if not 0 <= c < f.size:
        raise IndexError(f"class index {c} out of range for {f.size} logits")
    s = sm.clamp_log_variance(s)
    inv_var = math.exp(-s)
    scaled = inv_var * f
    lse = _logsumexp(scaled)
    probs = np.exp(scaled - lse)
    value = -scaled[c] + lse
    onehot = np.zeros_like(f)
    onehot[c] = 1.0
    d_logits = inv_var * (probs - onehot)
    d_s = inv_var * (f[c] - float(np.dot(probs, f)))
    return LossEval(float(value), d_logits, float(d_s))


# ----------------------------------------------------------------------------
# Multi-task combinations
# ----------------------------------------------------------------------------


def kendall_gal_multitask(l_reg: float, l_cls: float, s1: float, s2: float) -> float:
    """Reference two-task objective with squared-error and cross-entropy terms."""
    s1 = sm.clamp_log_variance(s1)
    s2 = sm.clamp_log_variance(s2)
    return 0.5 * math.exp(-s1) * l_reg + 0.5 * s1 + math.exp(-s2) * l_cls + 0.5 * s2


def multitask_loss(reg: LossEval, cls: LossEval, class_weight: float = DEFAULT_CLASS_WEIGHT) -> float:
    if class_weight < 0.0:
        raise ValueError("class_weight must be >= 0")
    return float(reg.value) + class_weight * float(cls.value)
