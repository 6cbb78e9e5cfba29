"""Modified Bessel function K_0 and the 2-D convection-diffusion fundamental solution."""
from __future__ import annotations

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061
_EPS = 1e-16
_MAX_ITER = 10000


def _k0_series(x: float) -> float:
    """Power series K_0(x) = -(ln(x/2) + gamma) I_0(x) + sum_k H_k (x^2/4)^k / (k!)^2."""
    t = 0.25 * x * x
    term, harmonic = 1.0, 0.0
    i0, tail = 1.0, 0.0
    for k in range(1, 200):
        term *= t / (k * k)
        harmonic += 1.0 / k
        i0 += term
        tail += term * harmonic
        if term * harmonic < _EPS * abs(tail):
            break
    return -(math.log(0.5 * x) + EULER_GAMMA) * i0 + tail


def _k0e_cf(x: float) -> float:
    """e^x K_0(x) for x >= 2 from Steed's evaluation of the second continued fraction."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, _MAX_ITER):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    else:
        raise ArithmeticError(f"K0 continued fraction did not converge at x={x}")
    return math.sqrt(math.pi / (2.0 * x)) / s


def _check(x: float) -> float:
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"K0 needs x > 0, got {x}")
    return x


def bessel_k0(x):
    """K_0(x) for x > 0; series on (0, 2], continued fraction above."""
    if np.ndim(x):
        return np.vectorize(bessel_k0, otypes=[float])(x)
    x = _check(x)
    return _k0_series(x) if x <= 2.0 else math.exp(-x) * _k0e_cf(x)


def bessel_k0e(x):
    """Exponentially scaled e^x K_0(x); finite for large x where K_0 underflows."""
    if np.ndim(x):
        return np.vectorize(bessel_k0e, otypes=[float])(x)
    x = _check(x)
    return math.exp(x) * _k0_series(x) if x <= 2.0 else _k0e_cf(x)


def fundamental_solution_2d(xy, xi_eta, epsilon: float, b_value: float) -> float:
    """g(x, y; xi, eta) = exp(q xi1) K_0(q r) / (2 pi eps), q = b/2.

    Scaled variables xi1 = (xi - x)/eps and r = |(xi, eta) - (x, y)|/eps.
    The two exponentials are combined so that large arguments do not
    overflow.
    """
    x, y = map(float, xy)
    xi, eta = map(float, xi_eta)
    r = math.hypot(xi - x, eta - y) / epsilon
    if r == 0.0:
        raise ValueError("source and evaluation point coincide")
    q = 0.5 * b_value
    xi1 = (xi - x) / epsilon
    return math.exp(q * (xi1 - r)) * bessel_k0e(q * r) / (2.0 * math.pi * epsilon)
