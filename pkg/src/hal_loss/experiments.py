"""Grid experiments built on the trainer: label-noise and sigma-recovery sweeps.

Grid points are independent, so they may run in a process pool; results are
always returned in grid order, making the output independent of scheduling.
``HAL_LOSS_THREADS`` caps the pool size (0 or unset means one worker per CPU).
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from hal_loss.synth_data import DEFAULT_WEIGHTS, generate_classification, generate_regression
from hal_loss.trainer import ToyModel, TrainConfig, train

# Log-variances learn on a slower timescale than the weights here; with equal
# rates the classifier collapses toward p_t = 0.5 before sigma2 can respond.
LABEL_NOISE_CONFIG = TrainConfig(s_lr_scale=0.1)
FLIP_GRID = (0.0, 0.1, 0.3)
SEEDS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class DataSpec:
    n_reg: int = 1000
    n_cls: int = 2000
    sigma_true: float = 0.3
    flip_rate: float = 0.1
    weights: tuple = DEFAULT_WEIGHTS
    n_test: int = 2000


@dataclass(frozen=True)
class SweepPoint:
    seed: int
    flip_rate: float
    sigma_true: float
    sigma1_hat: float
    sigma2_hat: float
    reg_residual_rms: float
    test_accuracy: float
    baseline_test_accuracy: float
    diverged: bool


def max_workers() -> int:
    raw = os.environ.get("HAL_LOSS_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("HAL_LOSS_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def clean_accuracy(model: ToyModel, weights, n: int, seed: int) -> float:
    """Accuracy against noiseless labels on a fresh held-out sample."""
    test = generate_classification(n, weights, flip_rate=0.0, seed=seed + 1_000_003)
    return float(np.mean(model.classify(test.inputs) == test.clean_targets))


def run_point(config: TrainConfig, data: DataSpec, seed: int, with_baseline: bool = False) -> SweepPoint:
    reg = generate_regression(data.n_reg, data.weights, data.sigma_true, seed)
    cls = generate_classification(data.n_cls, data.weights, data.flip_rate, seed)
    cfg = replace(config, seed=seed)
    rep = train(cfg, reg, cls)
    baseline = float("nan")
    if with_baseline:
        # s2 frozen at 0 makes the classification loss plain focal loss
        base = train(replace(cfg, freeze_log_variances=True, s2_init=0.0), reg, cls)
        baseline = clean_accuracy(base.final_model, data.weights, data.n_test, seed)
    return SweepPoint(
        seed=seed,
        flip_rate=data.flip_rate,
        sigma_true=data.sigma_true,
        sigma1_hat=rep.sigma1_hat,
        sigma2_hat=rep.sigma2_hat,
        reg_residual_rms=rep.reg_residual_rms,
        test_accuracy=clean_accuracy(rep.final_model, data.weights, data.n_test, seed),
        baseline_test_accuracy=baseline,
        diverged=rep.diverged,
    )


def _run_star(args) -> SweepPoint:
    return run_point(*args)


def run_grid(jobs: list[tuple], workers: int | None = None) -> list[SweepPoint]:
    workers = max_workers() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [_run_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_star, jobs))


def label_noise_sweep(
    flip_grid=FLIP_GRID,
    seeds=SEEDS,
    config: TrainConfig = LABEL_NOISE_CONFIG,
    data: DataSpec = DataSpec(n_reg=500),
    with_baseline: bool = False,
    workers: int | None = None,
) -> list[SweepPoint]:
    jobs = [
        (config, replace(data, flip_rate=fr), seed, with_baseline)
        for seed in seeds
        for fr in flip_grid
    ]
    return run_grid(jobs, workers)


def sigma_sweep(
    sigma_grid=(0.1, 0.3, 0.5),
    seeds=(0,),
    config: TrainConfig = TrainConfig(beta=0.1),
    data: DataSpec = DataSpec(n_reg=10000, n_cls=500),
    workers: int | None = None,
) -> list[SweepPoint]:
    jobs = [(config, replace(data, sigma_true=st), seed, False) for seed in seeds for st in sigma_grid]
    return run_grid(jobs, workers)


def strictly_increasing_by_seed(points: list[SweepPoint], key: str = "sigma2_hat") -> dict[int, bool]:
    out: dict[int, list[SweepPoint]] = {}
    for p in points:
        out.setdefault(p.seed, []).append(p)
    result = {}
    for seed, pts in out.items():
        vals = [getattr(p, key) for p in sorted(pts, key=lambda p: p.flip_rate)]
        result[seed] = all(a < b for a, b in zip(vals, vals[1:]))
    return result
