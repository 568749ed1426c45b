"""Scalar special functions and the sigma / tau / Laplace-rate helpers.

Everything here works on plain Python floats. The log-variance ``s`` is the
learnable quantity; ``sigma = exp(s / 2)``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

S_MIN = -20.0
S_MAX = 20.0

# Laplace rates above this are reported as saturated and clamped.
ALPHA_CAP = 1e6

_SQRT2 = math.sqrt(2.0)
_SQRTPI = math.sqrt(math.pi)

# erfcx switches from erfc(x) * exp(x^2) to the continued fraction here.
_CF_SWITCH = 10.0
_CF_TERMS = 80


def erfc_stable(x: float) -> float:
    """Complementary error function, computed directly (never as 1 - erf)."""
    return math.erfc(x)


def erfcx(x: float) -> float:
    """Scaled complementary error function ``exp(x**2) * erfc(x)``.

    For large positive x the Laplace continued fraction

        erfc(x) = exp(-x^2) / sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))

    is evaluated bottom-up with a fixed depth, so the result never goes
    through an underflowing ``erfc`` or an overflowing ``exp``.
    """
    if x < _CF_SWITCH:
        if x < -26.0:
            return math.inf
        return math.erfc(x) * math.exp(x * x)
    t = x
    for k in range(_CF_TERMS, 0, -1):
        t = x + 0.5 * k / t
    return 1.0 / (_SQRTPI * t)


def log_erfc(x: float) -> float:
    """``log(erfc(x))`` without underflow for large x or cancellation near 0."""
    if x < 0.5:
        return math.log1p(-math.erf(x))
    if x < _CF_SWITCH:
        return math.log(math.erfc(x))
    return -x * x + math.log(erfcx(x))


def _check_positive(beta: float, sigma: float) -> None:
    if not beta > 0.0:
        raise ValueError(f"beta must be > 0, got {beta!r}")
    if not sigma > 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma!r}")


def tau_argument(beta: float, sigma: float) -> float:
    """The erfc argument ``1 / (beta^2 * sigma * sqrt(2))``."""
    _check_positive(beta, sigma)
    return 1.0 / (beta * beta * sigma * _SQRT2)


def tau(beta: float, sigma: float) -> float:
    """Probability mass of N(0, sigma^2) outside ``|t| < 1/beta^2``."""
    return erfc_stable(tau_argument(beta, sigma))


def log_tau(beta: float, sigma: float) -> float:
    return log_erfc(tau_argument(beta, sigma))


def dlog_tau_ds(beta: float, sigma: float) -> float:
    """Derivative of ``log tau`` w.r.t. the log-variance ``s``.

    With u the erfc argument, du/ds = -u/2 and
    d log erfc(u)/du = -2 / (sqrt(pi) * erfcx(u)).
    """
    u = tau_argument(beta, sigma)
    return u / (_SQRTPI * erfcx(u))


class LaplaceRate(NamedTuple):
    alpha: float
    saturated: bool


def laplace_rate(beta: float, sigma: float) -> LaplaceRate:
    """Laplace rate ``-beta^2 log tau`` together with a saturation flag.

    Rates above ``ALPHA_CAP`` (sigma tiny relative to the threshold) are
    clamped to the cap and flagged instead of raising.
    """
    alpha = -beta * beta * log_tau(beta, sigma)
    if alpha > ALPHA_CAP or not math.isfinite(alpha):
        return LaplaceRate(ALPHA_CAP, True)
    return LaplaceRate(alpha, False)


def laplace_rate_alpha(beta: float, sigma: float) -> float:
    return laplace_rate(beta, sigma).alpha


def clamp_log_variance(s: float) -> float:
    if math.isnan(s):
        raise ValueError("log-variance is NaN")
    return min(max(s, S_MIN), S_MAX)


def sigma_from_log_variance(s: float) -> float:
    return math.exp(0.5 * clamp_log_variance(s))


def log_variance_from_sigma(sigma: float) -> float:
    if not sigma > 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma!r}")
    return 2.0 * math.log(sigma)
