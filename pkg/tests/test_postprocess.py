import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerfem.elements import LocalSpace
from layerfem.interpolation import DiscreteField, DofMap, interpolate
from layerfem.mesh import MeshFamily, MeshSpec, build_macro_mesh, build_stype_mesh
from layerfem.postprocess import (gl_subsample_indices, postprocess_biquadratic, postprocess_gl,
                                  postprocess_vec)


def _mesh(N=8):
    return build_stype_mesh(MeshSpec(N, 1e-3, 2.5, 1.0, MeshFamily("shishkin")))


def _poly(q, seed):
    # sum of two separable polynomials of degree q in each variable
    rng = np.random.default_rng(seed)
    a, b, c, d = rng.standard_normal((4, q + 1))
    P = np.polynomial.polynomial.polyval
    return lambda x, y: P(x, a) * P(y, b) + P(x, c) * P(y, d)


def _sample_points(n=200, seed=0):
    return np.random.default_rng(seed).uniform(0, 1, (2, n))


CASES = [(postprocess_vec, "vec", p) for p in (2, 3, 4)] + \
        [(postprocess_gl, "gl", p) for p in (1, 2, 3, 4)] + [(postprocess_biquadratic, "gl", 1)]


@pytest.mark.parametrize("post,interp,p", CASES, ids=lambda v: getattr(v, "__name__", str(v)))
def test_recovers_higher_degree_polynomial(post, interp, p):
    mesh = _mesh()
    f = _poly(p + 1, seed=p)
    U = post(interpolate(f, mesh, LocalSpace.full(p), interp))
    assert U.degree == p + 1
    x, y = _sample_points()
    np.testing.assert_allclose(U(x, y), f(x, y), atol=1e-9 * np.abs(f(x, y)).max())


@pytest.mark.parametrize("post,interp,p", CASES, ids=lambda v: getattr(v, "__name__", str(v)))
def test_constant_field(post, interp, p):
    mesh = _mesh()
    U = post(interpolate(lambda x, y: 3.0 + 0 * x, mesh, LocalSpace.full(p), interp))
    x, y = _sample_points()
    np.testing.assert_allclose(U(x, y), 3.0, atol=1e-12)


def test_gl_subsample_indices():
    assert gl_subsample_indices(4) == [0, 1, 3, 5, 7, 8]
    for p in range(1, 8):
        idx = gl_subsample_indices(p)
        assert len(idx) == p + 2 and idx[0] == 0 and idx[-1] == 2 * p
        assert idx == sorted(set(idx))


@pytest.mark.parametrize("post,interp,p", CASES, ids=lambda v: getattr(v, "__name__", str(v)))
def test_continuity_across_macro_edges(post, interp, p):
    mesh = _mesh()
    U = post(interpolate(lambda x, y: np.sin(3 * x) * np.exp(y), mesh, LocalSpace.full(p), interp))
    t = np.linspace(-1, 1, 5)
    v = U.eval_tensor(np.array([-1.0, 1.0]), t, derivs=0)["v"]
    Nx, Ny = U.macro.Nx, U.macro.Ny
    for I in range(Nx - 1):
        for J in range(Ny):
            np.testing.assert_allclose(v[I * Ny + J, 5:], v[(I + 1) * Ny + J, :5], atol=1e-12)


@given(seed=st.integers(0, 2**31), a=st.floats(-5, 5), p=st.integers(2, 4))
def test_linearity(seed, a, p):
    rng = np.random.default_rng(seed)
    dm = DofMap(_mesh(), LocalSpace.full(p))
    u = DiscreteField(dm, rng.standard_normal(dm.n_dofs))
    w = DiscreteField(dm, rng.standard_normal(dm.n_dofs))
    lhs = postprocess_vec(DiscreteField(dm, a * u.coeffs + w.coeffs)).coeffs
    rhs = a * postprocess_vec(u).coeffs + postprocess_vec(w).coeffs
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + abs(a)))


def test_degree_checks():
    mesh = _mesh()
    with pytest.raises(ValueError):
        postprocess_vec(interpolate(lambda x, y: x, mesh, LocalSpace.full(1)))
    with pytest.raises(ValueError):
        postprocess_biquadratic(interpolate(lambda x, y: x, mesh, LocalSpace.full(2)))


def test_macro_from_other_mesh_rejected():
    u = interpolate(lambda x, y: x * y, _mesh(8), LocalSpace.full(2))
    with pytest.raises(ValueError):
        postprocess_vec(u, build_macro_mesh(_mesh(16)))
