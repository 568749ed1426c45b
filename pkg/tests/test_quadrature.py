import math

import pytest
from scipy import integrate as si

from hal_loss.quadrature import integrate


@pytest.mark.parametrize(
    "f, a, b, exact",
    [
        (math.sin, 0.0, math.pi, 2.0),
        (math.exp, -1.0, 2.0, math.e**2 - math.exp(-1.0)),
        (lambda x: x**7 - 3 * x**2, -2.0, 3.0, (3**8 - 2**8) / 8 - (27 + 8)),
        (lambda x: 1.0 / (1.0 + x * x), -50.0, 50.0, 2 * math.atan(50.0)),
    ],
)
def test_known_integrals(f, a, b, exact):
    res = integrate(f, a, b, abs_tol=1e-13, rel_tol=1e-13)
    assert res.converged
    assert res.value == pytest.approx(exact, rel=1e-12, abs=1e-13)


def test_matches_scipy_on_peaked_integrand():
    f = lambda x: math.exp(-((x - 0.3) ** 2) / 1e-4)
    ours = integrate(f, -5.0, 5.0, abs_tol=1e-14, rel_tol=1e-12, points=[0.3])
    ref, _ = si.quad(f, -5.0, 5.0, points=[0.3], epsabs=1e-14, epsrel=1e-12)
    assert ours.value == pytest.approx(ref, rel=1e-10)


def test_reversed_and_empty_intervals():
    assert integrate(math.cos, 1.0, 0.0).value == pytest.approx(-math.sin(1.0), rel=1e-12)
    assert integrate(math.cos, 1.0, 1.0).value == 0.0


def test_reports_non_convergence():
    res = integrate(lambda x: 1.0 / math.sqrt(abs(x) + 1e-300), -1.0, 1.0, 1e-15, 1e-15, max_intervals=20)
    assert not res.converged
    assert res.abs_error > 0


def test_deterministic():
    f = lambda x: math.exp(-x) * math.sin(10 * x)
    assert integrate(f, 0, 10) == integrate(f, 0, 10)
