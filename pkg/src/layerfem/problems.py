"""Manufactured test problems with an exponential layer at x = 0 and
characteristic layers at y = 0 and y = 1."""
from __future__ import annotations

import math

import numpy as np

from .fem import ExactSolution, Problem


def _layer_solution(eps: float):
    """u(x, y) = X(x) Y(y) with closed-form first and second derivatives."""
    s = math.sqrt(eps)
    dx = -math.expm1(-1.0 / eps)  # 1 - e^{-1/eps}
    ex1 = math.exp(-1.0 / eps)
    dy = -math.expm1(-1.0 / s)
    hp = 0.5 * math.pi

    def X(x):
        return np.cos(hp * x) - (np.exp(-x / eps) - ex1) / dx

    def X1(x):
        return -hp * np.sin(hp * x) + np.exp(-x / eps) / (eps * dx)

    def X2(x):
        return -hp * hp * np.cos(hp * x) - np.exp(-x / eps) / (eps * eps * dx)

    def Y(y):
        return -np.expm1(-y / s) * -np.expm1(-(1.0 - y) / s) / dy

    def Y1(y):
        return (np.exp(-y / s) - np.exp(-(1.0 - y) / s)) / (s * dy)

    def Y2(y):
        return -(np.exp(-y / s) + np.exp(-(1.0 - y) / s)) / (eps * dy)

    return ExactSolution(u=lambda x, y: X(x) * Y(y),
                         ux=lambda x, y: X1(x) * Y(y),
                         uy=lambda x, y: X(x) * Y1(y),
                         uxx=lambda x, y: X2(x) * Y(y),
                         uyy=lambda x, y: X(x) * Y2(y))


def _manufactured(eps, b, bx, c, beta, gamma, name) -> Problem:
    ex = _layer_solution(eps)

    def f(x, y):
        return (-eps * (ex.uxx(x, y) + ex.uyy(x, y)) - b(x, y) * ex.ux(x, y)
                + c(x, y) * ex.u(x, y))

    return Problem(b=b, c=c, f=f, beta=beta, gamma=gamma, epsilon=eps, bx=bx, exact=ex, name=name)


def problem_example1(eps: float = 1e-6) -> Problem:
    """-eps Lap u - (2 - x) u_x + 3/2 u = f; gamma = 1, beta = 1."""
    return _manufactured(eps,
                         b=lambda x, y: 2.0 - x + 0.0 * y,
                         bx=lambda x, y: -1.0 + 0.0 * x,
                         c=lambda x, y: 1.5 + 0.0 * x,
                         beta=1.0, gamma=1.0, name="example1")


def problem_example2(eps: float = 1e-6) -> Problem:
    """-eps Lap u - u_x + 1/2 u = f; gamma = 1/2, beta = 1.

    With constant b the convective and divergence forms coincide.
    """
    return _manufactured(eps,
                         b=lambda x, y: 1.0 + 0.0 * x,
                         bx=lambda x, y: 0.0 * x,
                         c=lambda x, y: 0.5 + 0.0 * x,
                         beta=1.0, gamma=0.5, name="example2")
