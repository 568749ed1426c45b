"""Full-batch trainer for a two-head linear model with learned log-variances.

The regression head predicts a scalar target and is scored with the Bayesian
Smooth L1 loss (log-variance ``s1``); the classification head produces a
logit scored with the Bayesian Focal loss (log-variance ``s2``). The total
objective is ``reg + class_weight * cls`` and all gradients are the closed
forms from :mod:`hal_loss.losses` chained through the linear model.

This module also hosts the finite-difference gradient checker.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from hal_loss import losses
from hal_loss import scalar_math as sm
from hal_loss.synth_data import SyntheticDataset, Xoshiro256

DIVERGENCE_LIMIT = 1e6


@dataclass
class ToyModel:
    weights_reg: np.ndarray  # (d + 1,), bias last
    weights_cls: np.ndarray

    def predict_reg(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights_reg[:-1] + self.weights_reg[-1]

    def logits(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights_cls[:-1] + self.weights_cls[-1]

    def classify(self, x: np.ndarray) -> np.ndarray:
        return (self.logits(x) > 0.0).astype(float)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    iterations: int = 5000
    s1_init: float = 1.0
    s2_init: float = 0.0
    beta: float = losses.DEFAULT_BETA
    gamma: float = losses.DEFAULT_GAMMA
    class_weight: float = losses.DEFAULT_CLASS_WEIGHT
    seed: int = 0
    reduction: str = "mean"
    optimizer: str = "gd"  # "gd" | "adam"
    # learning-rate multiplier for s1/s2 relative to the weights
    s_lr_scale: float = 1.0
    # keep s1/s2 at their initial values (s2 = 0 turns BFL into plain focal)
    freeze_log_variances: bool = False
    record_every: int = 1
    init_scale: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.reduction not in ("mean", "sum"):
            raise ValueError(f"unknown reduction {self.reduction!r}")
        if self.optimizer not in ("gd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        # validates beta / gamma
        losses.LossParams(self.beta, self.gamma, 0.0)
        if self.class_weight < 0:
            raise ValueError("class_weight must be >= 0")


@dataclass
class TrainReport:
    final_model: ToyModel
    s1_final: float
    s2_final: float
    sigma1_hat: float
    sigma2_hat: float
    loss_trajectory: list[tuple[int, float, float, float]]
    wall_time: float
    iterations_run: int
    diverged: bool = False
    saturated: bool = False
    reg_residual_rms: float = math.nan
    cls_clean_accuracy: float = math.nan

    def to_dict(self) -> dict:
        d = asdict(self)
        d["final_model"] = {
            "weights_reg": [float(v) for v in self.final_model.weights_reg],
            "weights_cls": [float(v) for v in self.final_model.weights_cls],
        }
        d["loss_trajectory"] = [list(row) for row in self.loss_trajectory]
        return d


def _augment(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


def objective(
    params: np.ndarray,
    xr: np.ndarray,
    yr: np.ndarray,
    xc: np.ndarray,
    yc: np.ndarray,
    config: TrainConfig,
):
    """Total loss and gradient for the flat parameter vector.

    ``params`` is ``[w_reg (d+1), w_cls (d+1), s1, s2]`` and ``xr``/``xc``
    already carry the bias column. Returns ``(total, reg, cls, grad, saturated)``.
    """
    k = xr.shape[1]
    w_reg, w_cls = params[:k], params[k:2 * k]
    s1, s2 = params[2 * k], params[2 * k + 1]

    r = yr - xr @ w_reg
    ev_r = losses.reduce(
        losses.bayesian_smooth_l1(np.abs(r), losses.LossParams(config.beta, config.gamma, s1)),
        config.reduction,
    )
    # d eps / d prediction = -sign(r)
    g_wr = xr.T @ (-np.sign(r) * ev_r.d_input)

    sign = 2.0 * yc - 1.0
    p_t_raw = _sigmoid(sign * (xc @ w_cls))
    p_t = losses.clamp_prob(p_t_raw)
    ev_c = losses.reduce(
        losses.bayesian_focal(p_t, losses.LossParams(config.beta, config.gamma, s2)),
        config.reduction,
    )
    # clamping has zero derivative where it binds
    dpt_dz = np.where(p_t == p_t_raw, sign * p_t * (1.0 - p_t), 0.0)
    g_wc = xc.T @ (ev_c.d_input * dpt_dz)

    cw = config.class_weight
    total = ev_r.value + cw * ev_c.value
    grad = np.concatenate([g_wr, cw * g_wc, [ev_r.d_s, cw * ev_c.d_s]])
    return total, ev_r.value, ev_c.value, grad, ev_r.saturated


def train(config: TrainConfig, reg_data: SyntheticDataset, cls_data: SyntheticDataset) -> TrainReport:
    """Jointly fit both heads and both log-variances by full-batch descent.

    Stops early (``diverged=True``) when the total loss is non-finite or
    exceeds ``DIVERGENCE_LIMIT``. Log-variances are clamped to
    ``[S_MIN, S_MAX]`` after every step.
    """
    if len(reg_data) == 0 or len(cls_data) == 0:
        raise ValueError("datasets must be non-empty")
    start = time.perf_counter()
    xr, yr = _augment(reg_data.inputs), reg_data.targets
    xc, yc = _augment(cls_data.inputs), cls_data.targets
    k = xr.shape[1]
    if xc.shape[1] != k:
        raise ValueError("regression and classification inputs differ in dimension")

    rng = Xoshiro256(config.seed)
    init = [config.init_scale * (2.0 * rng.uniform() - 1.0) for _ in range(2 * k)]
    params = np.array(init + [config.s1_init, config.s2_init], dtype=float)
    params[-2:] = [sm.clamp_log_variance(v) for v in params[-2:]]

    lr = np.full(params.size, float(config.learning_rate))
    lr[-2:] *= 0.0 if config.freeze_log_variances else config.s_lr_scale
    m = np.zeros_like(params)
    v = np.zeros_like(params)

    trajectory: list[tuple[int, float, float, float]] = []
    diverged = saturated = False
    it = 0
    for it in range(config.iterations):
        total, reg, cls, grad, sat = objective(params, xr, yr, xc, yc, config)
        saturated |= sat
        if it % config.record_every == 0:
            trajectory.append((it, float(total), float(reg), float(cls)))
        if not math.isfinite(total) or abs(total) > DIVERGENCE_LIMIT or not np.all(np.isfinite(grad)):
            diverged = True
            break
        if config.optimizer == "adam":
            m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * grad
            v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * grad * grad
            m_hat = m / (1.0 - config.adam_beta1 ** (it + 1))
            v_hat = v / (1.0 - config.adam_beta2 ** (it + 1))
            params = params - lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)
        else:
            params = params - lr * grad
        params[-2] = sm.clamp_log_variance(params[-2])
        params[-1] = sm.clamp_log_variance(params[-1])

    if not diverged:
        total, reg, cls, _, sat = objective(params, xr, yr, xc, yc, config)
        saturated |= sat
        trajectory.append((config.iterations, float(total), float(reg), float(cls)))
        it = config.iterations

    model = ToyModel(params[:k].copy(), params[k:2 * k].copy())
    s1, s2 = float(params[-2]), float(params[-1])
    resid = reg_data.targets - model.predict_reg(reg_data.inputs)
    accuracy = float(np.mean(model.classify(cls_data.inputs) == cls_data.clean_targets))
    return TrainReport(
        final_model=model,
        s1_final=s1,
        s2_final=s2,
        sigma1_hat=sm.sigma_from_log_variance(s1),
        sigma2_hat=sm.sigma_from_log_variance(s2),
        loss_trajectory=trajectory,
        wall_time=time.perf_counter() - start,
        iterations_run=it,
        diverged=diverged,
        saturated=saturated,
        reg_residual_rms=float(np.sqrt(np.mean(resid * resid))),
        cls_clean_accuracy=accuracy,
    )


# ----------------------------------------------------------------------------
# Gradient checking
# ----------------------------------------------------------------------------

GRADIENT_LOSSES = ("bayesian_smooth_l1", "bayesian_focal", "bayesian_l2", "boltzmann_softmax_nll")
KINK_EXCLUSION = 1e-3


@dataclass(frozen=True)
class GradCheckEntry:
    point: dict
    wrt: str
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradCheckReport:
    loss_id: str
    entries: list[GradCheckEntry] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((e.rel_error for e in self.entries), default=0.0)


def _step(x: float) -> float:
    return 1e-6 * max(1.0, abs(x))


def central_difference(f, x: float) -> float:
    h = _step(x)
    return (f(x + h) - f(x - h)) / (2.0 * h)


def relative_error(analytic: float, numeric: float) -> float:
    """``|a - n| / max(1, |a|, |n|)``; absolute for gradients below one."""
    return abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))


def _sample_point(loss_id: str, rng: Xoshiro256) -> dict:
    u = rng.uniform
    s = -2.0 + 4.0 * u()
    if loss_id == "bayesian_smooth_l1":
        beta = 0.5 + 1.5 * u()
        thr = 1.0 / (beta * beta)
        while True:
            eps = 0.01 + (2.0 * thr + 1.0) * u()
            if abs(eps - thr) >= KINK_EXCLUSION + 2 * _step(eps):
                break
        return {"eps": eps, "beta": beta, "s": s}
    if loss_id == "bayesian_focal":
        return {"p_t": 0.02 + 0.96 * u(), "gamma": 5.0 * u(), "s": s}
    if loss_id == "bayesian_l2":
        return {"eps": 0.01 + 4.99 * u(), "s": s}
    if loss_id == "boltzmann_softmax_nll":
        k = 2 + int(4 * u())
        logits = [-3.0 + 6.0 * u() for _ in range(k)]
        return {"logits": logits, "c": int(k * u()), "s": s}
    raise ValueError(f"unknown loss {loss_id!r}; choose from {GRADIENT_LOSSES}")


def _evaluate(loss_id: str, point: dict) -> losses.LossEval:
    if loss_id == "bayesian_smooth_l1":
        return losses.bayesian_smooth_l1(point["eps"], losses.LossParams(beta=point["beta"], s=point["s"]))
    if loss_id == "bayesian_focal":
        return losses.bayesian_focal(point["p_t"], losses.LossParams(gamma=point["gamma"], s=point["s"]))
    if loss_id == "bayesian_l2":
        return losses.bayesian_l2(point["eps"], point["s"])
    if loss_id == "boltzmann_softmax_nll":
        return losses.boltzmann_softmax_nll(point["logits"], point["c"], point["s"])
    raise ValueError(f"unknown loss {loss_id!r}; choose from {GRADIENT_LOSSES}")


def _input_keys(loss_id: str) -> list:
    return {
        "bayesian_smooth_l1": ["eps"],
        "bayesian_focal": ["p_t"],
        "bayesian_l2": ["eps"],
    }.get(loss_id, [])


def check_point(loss_id: str, point: dict) -> list[GradCheckEntry]:
    ev = _evaluate(loss_id, point)
    entries = []

    def value_at(key, idx=None):
        def f(x):
            p = dict(point)
            if idx is None:
                p[key] = x
            else:
                p[key] = list(point[key])
                p[key][idx] = x
            return float(_evaluate(loss_id, p).value)
        return f

    checks = []
    if loss_id == "boltzmann_softmax_nll":
        for i, x in enumerate(point["logits"]):
            checks.append((f"logits[{i}]", value_at("logits", i), x, float(ev.d_input[i])))
    for key in _input_keys(loss_id):
        checks.append((key, value_at(key), point[key], float(ev.d_input)))
    checks.append(("s", value_at("s"), point["s"], float(ev.d_s)))

    for wrt, f, x, analytic in checks:
        numeric = central_difference(f, x)
        entries.append(GradCheckEntry(point, wrt, analytic, numeric, relative_error(analytic, numeric)))
    return entries


def gradient_check(loss_id: str, points: int = 100, seed: int = 0) -> GradCheckReport:
    """Compare analytic partials with central differences at random points.

    Smooth-L1 points within ``KINK_EXCLUSION`` of the branch switch are
    resampled, since the loss is not differentiable there.
    """
    if loss_id not in GRADIENT_LOSSES:
        raise ValueError(f"unknown loss {loss_id!r}; choose from {GRADIENT_LOSSES}")
    rng = Xoshiro256(seed)
    report = GradCheckReport(loss_id)
    for _ in range(points):
        report.entries.extend(check_point(loss_id, _sample_point(loss_id, rng)))
    return report
