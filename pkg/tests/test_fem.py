import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerfem.elements import LocalSpace, gauss_legendre_rule
from layerfem.fem import (ExactSolution, Problem, assemble, discrete_fields, exact_fields,
                          fluctuation_operator, form_action, make_stab_plan, solve, solve_problem)
from layerfem.interpolation import DiscreteField, DofMap, interpolate_vec
from layerfem.mesh import MeshFamily, MeshSpec, Region, build_stype_mesh, uniform_mesh
from layerfem.norms import energy_error, sd_norm_error
from layerfem.problems import problem_example1, problem_example2


def _mesh(N, eps, sigma=2.5, family="shishkin"):
    return build_stype_mesh(MeshSpec(N, eps, sigma, 1.0, MeshFamily(family)))


def test_sdfem_set2_weights():
    pr = problem_example1(1e-6)
    mesh = _mesh(64, 1e-6, 5.5, "bakhvalov-s")
    plan = make_stab_plan("sdfem", mesh, LocalSpace.full(4), pr, clamp=False)
    assert plan.region_delta[Region.OMEGA11] == 1 / 64
    assert plan.region_delta[Region.OMEGA21] == pytest.approx(1e3 * 64.0**-3)
    assert plan.region_delta[Region.OMEGA12] == 0.0
    tags = mesh.region_tags().ravel()
    assert np.all(plan.delta[tags == Region.OMEGA11] == 1 / 64)
    set1 = make_stab_plan("sdfem", mesh, LocalSpace.full(4), pr, sd_set=1, clamp=False)
    assert set1.region_delta[Region.OMEGA11] == 1.0


def test_sdfem_clamp_caps_weights():
    pr = problem_example1(1e-6)
    mesh = _mesh(16, 1e-6, 5.5, "bakhvalov-s")
    space = LocalSpace.full(4)
    raw = make_stab_plan("sdfem", mesh, space, pr, clamp=False)
    capped = make_stab_plan("sdfem", mesh, space, pr, clamp=True)
    assert np.all(capped.delta <= raw.delta)
    assert capped.mu > 0


def test_galerkin_plan_is_zero():
    pr = problem_example1(1e-4)
    plan = make_stab_plan("galerkin", _mesh(8, 1e-4), LocalSpace.full(2), pr)
    assert plan.is_zero


def test_modsdfem_midpoint_weight():
    eps = 1e-3
    pr = problem_example1(eps)
    mesh = _mesh(16, eps)
    plan = make_stab_plan("modsdfem", mesh, LocalSpace.full(1), pr)
    i, _ = DofMap(mesh, LocalSpace.full(1)).cell_indices
    h = mesh.hx[i]
    bsup = 2.0 - mesh.x[i]  # b = 2 - x is largest at the left cell edge
    expected = np.minimum(h / (2 * eps), 1 / bsup) * h / 4
    np.testing.assert_allclose(plan.weight_at(np.array([0.0]))[:, 0], expected, rtol=1e-13)
    np.testing.assert_allclose(plan.weight_at(np.array([-1.0, 1.0])), 0.0, atol=1e-18)


def test_unknown_method():
    with pytest.raises(ValueError):
        make_stab_plan("supg", _mesh(8, 1e-3), LocalSpace.full(1), problem_example1(1e-3))


def test_zero_rhs_gives_zero():
    pr = problem_example1(1e-4)
    zero = Problem(pr.b, pr.c, lambda x, y: 0.0 * x, pr.beta, pr.gamma, pr.epsilon, pr.bx)
    for method in ("galerkin", "sdfem", "lps", "modsdfem"):
        u, _ = solve_problem(zero, _mesh(8, 1e-4), LocalSpace.full(2), method)
        assert not np.any(u.coeffs)


def test_identity_dominated_dense_oracle():
    s = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
    pr = Problem(b=lambda x, y: 0.0 * x, c=lambda x, y: 1.0 + 0.0 * x,
                 f=lambda x, y: (2 * np.pi**2 + 1) * s(x, y), beta=0.0, gamma=1.0, epsilon=1.0)
    mesh = uniform_mesh(4)
    sys_ = assemble(pr, mesh, LocalSpace.full(1))
    A = sys_.matrix.toarray()
    assert A.shape == (9, 9)
    np.testing.assert_allclose(A, A.T, atol=1e-14)  # symmetric without convection
    u = solve(sys_)
    np.testing.assert_allclose(u.coeffs[sys_.dofmap.interior_dofs],
                               np.linalg.solve(A, sys_.rhs), atol=1e-10)


def test_sdfem_reference_error():
    pr = problem_example1(1e-6)
    mesh = _mesh(8, 1e-6, 5.5, "bakhvalov-s")
    u, _ = solve_problem(pr, mesh, LocalSpace.full(4), "sdfem", clamp=False)
    err = energy_error(pr.exact, u, pr.gamma, pr.epsilon)
    assert abs(err - 6.709e-4) / 6.709e-4 <= 0.10


@pytest.mark.parametrize("p", [2, 3, 4, 5])
def test_fluctuation_annihilates_low_degree(p):
    q = gauss_legendre_rule(p + 3)
    K = fluctuation_operator(p, q.nodes, q.weights)
    X, Y = np.meshgrid(q.nodes, q.nodes, indexing="ij")
    for a in range(p - 1):
        for b in range(p - 1 - a):
            np.testing.assert_allclose(K @ (X**a * Y**b).ravel(), 0.0, atol=1e-12)
    assert np.abs(K @ (X ** (p - 1)).ravel()).max() > 1e-3
    np.testing.assert_allclose(K @ K, K, atol=1e-12)


def _random_interior_field(mesh, space, rng):
    dm = DofMap(mesh, space)
    c = np.zeros(dm.n_dofs)
    c[dm.interior_dofs] = rng.standard_normal(dm.interior_dofs.size)
    return DiscreteField(dm, c)


@given(seed=st.integers(0, 2**31), p=st.integers(1, 4))
def test_sdfem_coercivity(seed, p):
    rng = np.random.default_rng(seed)
    eps = 1e-4
    pr = problem_example1(eps)
    mesh = _mesh(8, eps, p + 1.5, "bakhvalov-s")
    space = LocalSpace.full(p)
    plan = make_stab_plan("sdfem", mesh, space, pr, clamp=True)
    A = assemble(pr, mesh, space, plan).matrix
    v = _random_interior_field(mesh, space, rng)
    x = v.coeffs[v.dofmap.interior_dofs]
    lhs = x @ (A @ x)
    rhs = 0.5 * sd_norm_error(None, v, plan, pr.gamma, eps, pr.b) ** 2
    assert lhs >= rhs * (1 - 1e-10)


def _polynomial_problem(eps):
    # u = x(1-x) y(1-y) lies in Q_2, so every quadrature below is exact
    u = lambda x, y: x * (1 - x) * y * (1 - y)
    ex = ExactSolution(u=u, ux=lambda x, y: (1 - 2 * x) * y * (1 - y),
                       uy=lambda x, y: x * (1 - x) * (1 - 2 * y),
                       uxx=lambda x, y: -2 * y * (1 - y), uyy=lambda x, y: -2 * x * (1 - x))
    f = lambda x, y: (-eps * (ex.uxx(x, y) + ex.uyy(x, y)) - (1 + x) * ex.ux(x, y) + 0.5 * u(x, y))
    return Problem(b=lambda x, y: 1 + x, c=lambda x, y: 0.5 + 0 * x, f=f, beta=1.0, gamma=0.5,
                   epsilon=eps, bx=lambda x, y: 1 + 0 * x, exact=ex)


@pytest.mark.parametrize("method", ["galerkin", "lps", "sdfem"])
def test_consistency_with_polynomial_solution(method, rng):
    eps = 1e-2
    pr = _polynomial_problem(eps)
    space = LocalSpace.full(3)
    u, plan = solve_problem(pr, _mesh(8, eps), space, method)
    dm = u.dofmap
    inner = dm.interior_dofs
    r = (form_action(pr, dm, plan, exact_fields(pr.exact))
         - form_action(pr, dm, plan, discrete_fields(u)))[inner]
    stab = form_action(pr, dm, plan, exact_fields(pr.exact), parts=("stab",))[inner]
    if method == "lps":
        # a(u - u_N, v) = s(u, v): the projection stabilization is not consistent
        assert np.abs(stab).max() > 1e-8
        np.testing.assert_allclose(r, stab, atol=1e-13)
    else:
        # Galerkin orthogonality, and strong consistency of streamline diffusion
        np.testing.assert_allclose(r, 0.0, atol=1e-13)
        if method == "galerkin":
            np.testing.assert_allclose(u.coeffs, interpolate_vec(pr.exact.u, dm.mesh, space).coeffs,
                                       atol=1e-12)


def test_assembly_sparsity_and_determinism():
    pr = problem_example1(1e-6)
    mesh = _mesh(16, 1e-6, 5.5, "bakhvalov-s")
    for p in (1, 3):
        space = LocalSpace.full(p)
        plan = make_stab_plan("sdfem", mesh, space, pr)
        a = assemble(pr, mesh, space, plan)
        b = assemble(pr, mesh, space, plan)
        assert (a.matrix != b.matrix).nnz == 0 and np.array_equal(a.rhs, b.rhs)
        per_row = np.diff(a.matrix.indptr)
        assert per_row.max() <= (2 * p + 1) ** 2 * 2
        n = a.dofmap.interior_dofs.size
        assert a.matrix.shape == (n, n)
        assert np.all(a.matrix.data != 0)


def test_matrix_dump(tmp_path):
    pr = problem_example1(1e-3)
    sys_ = assemble(pr, _mesh(8, 1e-3), LocalSpace.full(1))
    path = tmp_path / "A.txt"
    sys_.dump_coo(path)
    lines = path.read_text().splitlines()
    n, m, nnz = map(int, lines[0][2:].split())
    assert (n, m, nnz) == (*sys_.matrix.shape, sys_.matrix.nnz) and len(lines) == nnz + 1


def test_problem_coefficients_and_exact():
    rng = np.random.default_rng(1)
    for factory, gamma in ((problem_example1, 1.0), (problem_example2, 0.5)):
        pr = factory(1e-3)
        assert pr.gamma == gamma and pr.check_coefficients()
        t = np.linspace(0, 1, 11)
        ex = pr.exact
        for x, y in ((t, 0 * t), (t, 0 * t + 1), (0 * t, t), (0 * t + 1, t)):
            assert np.abs(ex.u(x, y)).max() <= 1e-14
        x, y = rng.uniform(0, 1, (2, 1000))
        res = (-pr.epsilon * (ex.uxx(x, y) + ex.uyy(x, y)) - pr.b(x, y) * ex.ux(x, y)
               + pr.c(x, y) * ex.u(x, y) - pr.f(x, y))
        assert np.abs(res).max() <= 1e-9


def test_exact_derivatives_match_differences():
    ex = problem_example1(1e-3).exact
    x, y, h = 0.37, 0.61, 1e-6
    assert ex.ux(x, y) == pytest.approx((ex.u(x + h, y) - ex.u(x - h, y)) / (2 * h), rel=1e-6)
    assert ex.uy(x, y) == pytest.approx((ex.u(x, y + h) - ex.u(x, y - h)) / (2 * h), rel=1e-6)
