"""The Gaussian-core / Laplace-tail density behind the Bayesian Smooth L1 loss.

The density is N(0, sigma^2) on ``|t| < 1/beta^2`` and the full Laplace pdf
``(alpha/2) exp(-alpha |t|)`` outside. Its total mass is

    erf(1 / (beta^2 sigma sqrt 2)) + exp(-alpha / beta^2) = (1 - tau) + exp(-alpha / beta^2),

so it integrates to one exactly when ``alpha = -beta^2 log tau``. The
functions here check that identity numerically instead of assuming it. The
density is generally discontinuous at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from hal_loss import scalar_math as sm
from hal_loss.quadrature import QuadratureError, integrate

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# relative accuracy for the Gaussian tail mass used by the root finder
_TAIL_REL_TOL = 1e-13


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class PiecewiseDensitySpec:
    sigma: float
    beta: float
    alpha_rate: float

    def __post_init__(self):
        for name in ("sigma", "beta", "alpha_rate"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")

    @property
    def boundary(self) -> float:
        return 1.0 / (self.beta * self.beta)

    @classmethod
    def normalized(cls, sigma: float, beta: float) -> "PiecewiseDensitySpec":
        return cls(sigma, beta, sm.laplace_rate_alpha(beta, sigma))


@dataclass(frozen=True)
class QuadConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    # Laplace decay lengths integrated numerically past the boundary;
    # the remaining exp(-tail_cut) fraction is added analytically.
    tail_cut: float = 40.0
    max_intervals: int = 4000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.tail_cut > 0):
            raise ValueError("quadrature tolerances and tail_cut must be positive")


@dataclass(frozen=True)
class MassBreakdown:
    inner_closed: float
    outer_closed: float
    inner_quad: float
    outer_quad: float
    quad_error: float
    converged: bool

    @property
    def total_closed(self) -> float:
        return self.inner_closed + self.outer_closed

    @property
    def total_quad(self) -> float:
        return self.inner_quad + self.outer_quad


def gaussian_pdf(t: float, sigma: float) -> float:
    z = t / sigma
    return _INV_SQRT_2PI / sigma * math.exp(-0.5 * z * z)


def laplace_pdf(t: float, rate: float) -> float:
    return 0.5 * rate * math.exp(-rate * abs(t))


def piecewise_density(t: float, spec: PiecewiseDensitySpec) -> float:
    if abs(t) < spec.boundary:
        return gaussian_pdf(t, spec.sigma)
    return laplace_pdf(t, spec.alpha_rate)


def mass_breakdown(spec: PiecewiseDensitySpec, quad: QuadConfig = QuadConfig()) -> MassBreakdown:
    """Inner/outer masses both in closed form and by adaptive quadrature."""
    b = spec.boundary
    a = spec.alpha_rate
    u = sm.tau_argument(spec.beta, spec.sigma)
    inner_closed = math.erf(u)
    outer_closed = math.exp(-a * b)

    core = integrate(
        lambda t: gaussian_pdf(t, spec.sigma), 0.0, b,
        quad.abs_tol / 4, quad.rel_tol, quad.max_intervals,
    )
    span = quad.tail_cut / a
    tail = integrate(
        lambda t: laplace_pdf(t, a), b, b + span,
        quad.abs_tol / 4, quad.rel_tol, quad.max_intervals,
    )
    remainder = math.exp(-a * b - quad.tail_cut)
    return MassBreakdown(
        inner_closed=inner_closed,
        outer_closed=outer_closed,
        inner_quad=2.0 * core.value,
        outer_quad=2.0 * tail.value + remainder,
        quad_error=2.0 * (core.abs_error + tail.abs_error),
        converged=core.converged and tail.converged,
    )


def total_mass(spec: PiecewiseDensitySpec, quad: QuadConfig = QuadConfig()) -> float:
    """Total probability mass of the density (closed form, quadrature-checked).

    Raises:
        QuadratureError: quadrature did not converge, or disagrees with the
            closed form by more than the requested tolerance.
    """
    m = mass_breakdown(spec, quad)
    if not m.converged:
        raise QuadratureError(f"quadrature did not converge; achieved error estimate {m.quad_error:.3e}")
    allowed = max(quad.abs_tol, quad.rel_tol * abs(m.total_closed)) + m.quad_error
    if abs(m.total_closed - m.total_quad) > allowed:
        raise QuadratureError(
            f"closed form {m.total_closed!r} and quadrature {m.total_quad!r} differ "
            f"by more than {allowed:.3e}"
        )
    return m.total_closed


def gaussian_tail_mass(sigma: float, beta: float, quad: QuadConfig = QuadConfig()) -> float:
    """Mass of N(0, sigma^2) outside the core, by quadrature only (no erf).

    Beyond ``tail_cut`` standard deviations past the boundary the remainder is
    below exp(-tail_cut^2 / 2) relative and is dropped.
    """
    b = 1.0 / (beta * beta)
    res = integrate(
        lambda t: gaussian_pdf(t, sigma), b, b + quad.tail_cut * sigma,
        0.0, _TAIL_REL_TOL, quad.max_intervals,
    )
    if not res.converged:
        raise QuadratureError(f"tail quadrature did not converge; achieved error estimate {res.abs_error:.3e}")
    return 2.0 * res.value


def solve_alpha(
    sigma: float,
    beta: float,
    quad: QuadConfig = QuadConfig(),
    bracket: tuple[float, float] = (1e-8, 1e8),
    residual_tol: float = 1e-10,
    max_iter: int = 400,
) -> float:
    """Root-find the Laplace rate that makes the density integrate to one.

    The mass residual ``inner + outer - 1`` equals ``outer - G`` where G is
    the Gaussian mass outside the core; G comes from quadrature, so this is
    independent of the erfc closed form. The residual is measured relative to
    G so it stays resolvable when the tail is tiny. Bisection runs on the
    geometric midpoint of the bracket.
    """
    if not (sigma > 0 and beta > 0):
        raise ValueError("sigma and beta must be positive")
    b = 1.0 / (beta * beta)
    g = gaussian_tail_mass(sigma, beta, quad)
    if not g > 0.0:
        raise BracketError(f"Gaussian tail mass underflowed for sigma={sigma!r}, beta={beta!r} (saturated)")
    log_g = math.log(g)

    def residual(alpha: float) -> float:
        return math.expm1(-alpha * b - log_g)

    lo, hi = bracket
    r_lo, r_hi = residual(lo), residual(hi)
    if not (r_lo > 0.0 > r_hi):
        raise BracketError(f"no sign change on [{lo!r}, {hi!r}] (residuals {r_lo!r}, {r_hi!r})")
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)
        r = residual(mid)
        if abs(r) < residual_tol:
            return mid
        if r > 0.0:
            lo = mid
        else:
            hi = mid
        if hi <= lo * (1.0 + 4.0 * 2.0 ** -52):
            return mid
    return math.sqrt(lo * hi)
