import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from layerfem.green import EULER_GAMMA, bessel_k0, bessel_k0e, fundamental_solution_2d


def test_k0_at_one():
    assert bessel_k0(1.0) == pytest.approx(0.42102443824070834, rel=1e-15)


def test_small_argument_asymptotics():
    x = 1e-6
    assert bessel_k0(x) / (-math.log(x / 2) - EULER_GAMMA) == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_domain(bad):
    with pytest.raises(ValueError):
        bessel_k0(bad)


@given(x=st.floats(1e-8, 600.0))
def test_against_scipy(x):
    assert bessel_k0e(x) == pytest.approx(special.k0e(x), rel=1e-12)
    if x < 700:
        assert bessel_k0(x) == pytest.approx(special.k0(x), rel=1e-12, abs=1e-300)


def test_scaled_consistent():
    for x in (0.1, 1.9, 2.1, 10.0):
        assert bessel_k0e(x) == pytest.approx(math.exp(x) * bessel_k0(x), rel=1e-14)
    assert np.isfinite(bessel_k0e(1e4)) and bessel_k0(1e4) == 0.0
    np.testing.assert_allclose(bessel_k0(np.array([1.0, 2.0])), special.k0([1.0, 2.0]), rtol=1e-14)


def test_fundamental_solution_properties():
    eps, b = 0.02, 1.0
    x0 = (0.5, 0.5)
    g = lambda a, c: fundamental_solution_2d(x0, (a, c), eps, b)
    assert g(0.6, 0.5) > 0
    # symmetric about the flow line through the source
    assert g(0.55, 0.58) == pytest.approx(g(0.55, 0.42), rel=1e-14)
    # wake on the side of increasing xi, fast decay on the other
    assert g(0.6, 0.5) > 50 * g(0.4, 0.5)
    with pytest.raises(ValueError):
        g(0.5, 0.5)


def test_fundamental_solution_satisfies_pde():
    # away from the source: -eps Lap g + b g_xi = 0 in the (xi, eta) variables
    eps, b, h = 0.1, 1.0, 1e-3
    x0 = (0.2, 0.3)
    g = lambda a, c: fundamental_solution_2d(x0, (a, c), eps, b)
    for pt in ((0.5, 0.4), (0.1, 0.6), (0.35, 0.1)):
        a, c = pt
        lap = (g(a + h, c) + g(a - h, c) + g(a, c + h) + g(a, c - h) - 4 * g(a, c)) / h**2
        gx = (g(a + h, c) - g(a - h, c)) / (2 * h)
        res = -eps * lap + b * gx
        assert abs(res) <= 1e-4 * (abs(b * gx) + eps * abs(lap))
