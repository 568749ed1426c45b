"""Seeded synthetic regression and label-noise classification datasets.

Randomness comes from xoshiro256** seeded through splitmix64, both with the
reference constants, so a dataset can be regenerated bit for bit in any
language:

* uniform doubles are ``(next() >> 11) * 2**-53`` in [0, 1);
* features are ``2u - 1`` in [-1, 1);
* a standard normal consumes two uniforms u1, u2 (Box-Muller, cosine branch):
  ``sqrt(-2 log(1 - u1)) * cos(2 pi u2)``.

Per sample the stream is consumed in a fixed order: d feature uniforms, then
either one normal (regression) or one flip uniform (classification),
regardless of the noise level. Weight vectors carry the bias last.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1

DEFAULT_DIM = 4
DEFAULT_WEIGHTS = (1.0, -2.0, 0.5, 1.5, 0.3)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step; returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class Xoshiro256:
    """xoshiro256** generator (Blackman & Vigna)."""

    def __init__(self, seed: int = 0, state: tuple[int, int, int, int] | None = None):
        if state is None:
            sm_state = seed & _MASK64
            words = []
            for _ in range(4):
                sm_state, out = splitmix64(sm_state)
                words.append(out)
            state = tuple(words)
        if not any(state):
            raise ValueError("xoshiro256** state must not be all zero")
        self.s = [w & _MASK64 for w in state]

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


@dataclass
class SyntheticDataset:
    inputs: np.ndarray  # (n, d)
    targets: np.ndarray  # (n,) observed target or 0/1 label
    clean_targets: np.ndarray  # (n,) noiseless target or clean label
    true_weights: np.ndarray  # (d + 1,), bias last
    seed: int
    kind: str  # "regression" | "classification"
    noise_spec: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets differ in length")

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(self.dim)] + ["target", "clean_target"])
        for x, y, c in zip(self.inputs, self.targets, self.clean_targets):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y)), repr(float(c))])
        return buf.getvalue()


def _draw_inputs(rng: Xoshiro256, d: int) -> list[float]:
    return [2.0 * rng.uniform() - 1.0 for _ in range(d)]


def _linear(x: list[float], w: np.ndarray) -> float:
    acc = float(w[-1])
    for xi, wi in zip(x, w[:-1]):
        acc += xi * float(wi)
    return acc


def generate_regression(
    n: int,
    true_weights=DEFAULT_WEIGHTS,
    sigma_true: float = 0.3,
    seed: int = 0,
) -> SyntheticDataset:
    if n < 0:
        raise ValueError("n must be >= 0")
    if sigma_true < 0:
        raise ValueError("sigma_true must be >= 0")
    w = np.asarray(true_weights, dtype=float)
    d = w.size - 1
    rng = Xoshiro256(seed)
    xs, ys, clean = [], [], []
    for _ in range(n):
        x = _draw_inputs(rng, d)
        noise = rng.normal()
        f = _linear(x, w)
        xs.append(x)
        clean.append(f)
        ys.append(f + sigma_true * noise)
    return SyntheticDataset(
        inputs=np.array(xs, dtype=float).reshape(n, d),
        targets=np.array(ys, dtype=float),
        clean_targets=np.array(clean, dtype=float),
        true_weights=w,
        seed=seed,
        kind="regression",
        noise_spec={"sigma_true": sigma_true},
    )


def generate_classification(
    n: int,
    true_weights=DEFAULT_WEIGHTS,
    flip_rate: float = 0.1,
    seed: int = 0,
) -> SyntheticDataset:
    """Labels from the sign of a linear score, each flipped with ``flip_rate``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if not 0.0 <= flip_rate < 0.5:
        raise ValueError("flip_rate must be in [0, 0.5)")
    w = np.asarray(true_weights, dtype=float)
    d = w.size - 1
    rng = Xoshiro256(seed)
    xs, ys, clean = [], [], []
    for _ in range(n):
        x = _draw_inputs(rng, d)
        flip = rng.uniform() < flip_rate
        label = 1.0 if _linear(x, w) > 0.0 else 0.0
        xs.append(x)
        clean.append(label)
        ys.append(1.0 - label if flip else label)
    return SyntheticDataset(
        inputs=np.array(xs, dtype=float).reshape(n, d),
        targets=np.array(ys, dtype=float),
        clean_targets=np.array(clean, dtype=float),
        true_weights=w,
        seed=seed,
        kind="classification",
        noise_spec={"flip_rate": flip_rate},
    )
