import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerfem.elements import (MAX_DEGREE, LocalSpace, eval_basis, functionals_of,
                               gauss_legendre_rule, gauss_lobatto_points, inverse_inequality_constant,
                               lagrange_to_dofs, space_dimension)

SPACES = [LocalSpace.make(k, p) for k in ("full", "serendipity") for p in range(1, MAX_DEGREE + 1)]


@pytest.mark.parametrize("space,dim", [(LocalSpace.full(4), 25), (LocalSpace.serendipity(4), 17),
                                       (LocalSpace.serendipity(2), 8), (LocalSpace.full(1), 4)])
def test_dimensions(space, dim):
    assert space_dimension(space) == dim


def test_serendipity_dimension_formula():
    for p in range(1, MAX_DEGREE + 1):
        # dim P_p + 2 for p >= 2 (two edge bubbles), 4 for bilinear
        expected = 4 if p == 1 else (p + 1) * (p + 2) // 2 + 2
        assert LocalSpace.serendipity(p).dim == expected


def test_space_validation():
    with pytest.raises(ValueError):
        LocalSpace.full(0)
    with pytest.raises(ValueError):
        LocalSpace.full(MAX_DEGREE + 1)
    with pytest.raises(ValueError):
        LocalSpace.general(4, (0, 1, 1))  # increasing
    with pytest.raises(ValueError):
        LocalSpace.general(4, (3, 2, 1))  # exceeds p - 2
    with pytest.raises(ValueError):
        LocalSpace.make("trunk", 3)
    assert LocalSpace.general(4, (2, 1, -1)).n_interior == 5


def test_gauss_rules():
    q = gauss_legendre_rule(1)
    assert q.nodes.tolist() == [0.0] and q.weights.tolist() == [2.0]
    q = gauss_legendre_rule(2)
    np.testing.assert_allclose(q.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(q.weights, [1.0, 1.0], atol=1e-15)
    q = gauss_legendre_rule(6)
    assert abs(np.sum(q.weights * q.nodes**10) - 2 / 11) <= 1e-14


@given(n=st.integers(1, 20))
def test_gauss_exactness(n):
    q = gauss_legendre_rule(n)
    assert abs(q.weights.sum() - 2.0) <= 1e-13
    for d in range(2 * n):
        exact = 0.0 if d % 2 else 2.0 / (d + 1)
        assert abs(np.sum(q.weights * q.nodes**d) - exact) <= 1e-13


def test_gauss_against_numpy():
    for n in (3, 7, 12):
        t, w = np.polynomial.legendre.leggauss(n)
        q = gauss_legendre_rule(n)
        np.testing.assert_allclose(q.nodes, t, atol=1e-14)
        np.testing.assert_allclose(q.weights, w, atol=1e-14)


def test_lobatto_points():
    assert gauss_lobatto_points(1).tolist() == [-1.0, 1.0]
    np.testing.assert_allclose(gauss_lobatto_points(2), [-1.0, 0.0, 1.0], atol=1e-15)
    s = 1 / math.sqrt(5)
    np.testing.assert_allclose(gauss_lobatto_points(3), [-1.0, -s, s, 1.0], atol=1e-15)


@pytest.mark.parametrize("p", range(1, 11))
def test_lobatto_symmetric_increasing(p):
    t = gauss_lobatto_points(p)
    assert t.size == p + 1
    assert np.all(np.diff(t) > 0)
    np.testing.assert_allclose(t, -t[::-1], atol=1e-14)


def test_bilinear_at_centre():
    B = eval_basis(LocalSpace.full(1), 0.0, 0.0)
    np.testing.assert_allclose(B["v"], 0.25, atol=1e-15)
    np.testing.assert_allclose(np.abs(B["x"]), 0.25, atol=1e-15)


def _reproduce(space, f, npts=60, seed=3):
    rng = np.random.default_rng(seed)
    xi, eta = rng.uniform(-1, 1, (2, npts))
    c = functionals_of(space, f)
    return np.abs(eval_basis(space, xi, eta, 0)["v"] @ c - f(xi, eta)).max()


def _lstsq_residual(space, f, npts=200, seed=5):
    rng = np.random.default_rng(seed)
    xi, eta = rng.uniform(-1, 1, (2, npts))
    B = eval_basis(space, xi, eta, 0)["v"]
    c, *_ = np.linalg.lstsq(B, f(xi, eta), rcond=None)
    return np.abs(B @ c - f(xi, eta)).max()


@pytest.mark.parametrize("space", SPACES, ids=lambda s: f"{s.kind}{s.p}")
def test_total_degree_polynomials_reproduced(space):
    rng = np.random.default_rng(space.p)
    coef = {(a, b): rng.standard_normal() for a in range(space.p + 1)
            for b in range(space.p + 1 - a)}

    def f(x, y):
        return sum(c * x**a * y**b for (a, b), c in coef.items())

    assert _reproduce(space, f) <= 1e-11
    if space.kind == "serendipity":
        assert _lstsq_residual(LocalSpace.full(space.p), f) <= 1e-11


def test_serendipity_excludes_higher_monomial():
    assert _lstsq_residual(LocalSpace.serendipity(4), lambda x, y: x**2 * y**3) > 1e-3
    assert _lstsq_residual(LocalSpace.full(4), lambda x, y: x**2 * y**3) <= 1e-11


@pytest.mark.parametrize("space", SPACES, ids=lambda s: f"{s.kind}{s.p}")
def test_dual_basis(space):
    # the functionals applied to the shape functions give the identity
    def f(xi, eta):
        return eval_basis(space, xi, eta, 0)["v"]
    np.testing.assert_allclose(functionals_of(space, f), np.eye(space.dim), atol=1e-10)


@given(xi=st.floats(-0.95, 0.95), eta=st.floats(-0.95, 0.95),
       space=st.sampled_from(SPACES))
def test_derivatives_match_differences(xi, eta, space):
    h = 2e-4
    B = eval_basis(space, xi, eta, 1)

    def v(a, b):
        return eval_basis(space, a, b, 0)["v"]

    dx = (-v(xi + 2 * h, eta) + 8 * v(xi + h, eta) - 8 * v(xi - h, eta) + v(xi - 2 * h, eta)) / (12 * h)
    dy = (-v(xi, eta + 2 * h) + 8 * v(xi, eta + h) - 8 * v(xi, eta - h) + v(xi, eta - 2 * h)) / (12 * h)
    assert np.abs(dx - B["x"]).max() <= 1e-7
    assert np.abs(dy - B["y"]).max() <= 1e-7


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_lagrange_nodes_unisolvent(p):
    for fam in ("equidistant", "gauss-lobatto"):
        T = lagrange_to_dofs(LocalSpace.full(p), fam)
        assert T.shape == (LocalSpace.full(p).dim,) * 2
        assert np.isfinite(np.linalg.cond(T))


def test_inverse_inequality_constant():
    assert inverse_inequality_constant(LocalSpace.full(1)) == 0.0 or \
        inverse_inequality_constant(LocalSpace.full(1)) < 1e-6
    mus = [inverse_inequality_constant(LocalSpace.full(p)) for p in (2, 3, 4, 5)]
    assert all(a < b for a, b in zip(mus, mus[1:]))
