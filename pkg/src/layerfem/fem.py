"""Galerkin, streamline-diffusion, local-projection and bubble-SD discretizations.

Model problem: -eps Lap u - b u_x + c u = f in (0,1)^2, u = 0 on the boundary.
The Galerkin form is a(u, v) = eps (grad u, grad v) + (-b u_x + c u, v).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .elements import (LocalSpace, eval_basis_tensor, gauss_legendre_rule,
                       inverse_inequality_constant, legendre_table, quadrature_order)
from .interpolation import DiscreteField, DofMap
from .mesh import Region, TensorMesh

METHODS = ("galerkin", "sdfem", "lps", "modsdfem")
CHUNK = 512


class NumericalFailure(RuntimeError):
    """Raised when a factorization or solve does not meet its tolerance."""


@dataclass(frozen=True)
class ExactSolution:
    u: Callable
    ux: Callable
    uy: Callable
    uxx: Callable | None = None
    uyy: Callable | None = None


@dataclass(frozen=True)
class Problem:
    """Coefficients of -eps Lap u - b u_x + c u = f.

    ``bx`` is the x-derivative of b, needed for the coercivity check and the
    divergence form used by the finite difference scheme.
    """

    b: Callable
    c: Callable
    f: Callable
    beta: float
    gamma: float
    epsilon: float
    bx: Callable | None = None
    exact: ExactSolution | None = None
    name: str = "problem"

    def check_coefficients(self, n: int = 50) -> bool:
        """Sampled check of b >= beta and c + b_x/2 >= gamma on an n x n grid."""
        t = np.linspace(0.0, 1.0, n)
        X, Y = np.meshgrid(t, t, indexing="ij")
        b = np.broadcast_to(self.b(X, Y), X.shape)
        c = np.broadcast_to(self.c(X, Y), X.shape)
        bx = 0.0 if self.bx is None else np.broadcast_to(self.bx(X, Y), X.shape)
        tol = 1e-12
        return bool(np.all(b >= self.beta - tol) and np.all(c + 0.5 * bx >= self.gamma - tol))


def _on_cells(fn, X, Y):
    return np.broadcast_to(np.asarray(fn(X, Y), dtype=float), X.shape)


def _cell_sup(fn, dm: DofMap) -> np.ndarray:
    """max |fn| per cell, sampled at corners and a 7x7 Gauss grid."""
    x0, y0, h, k = dm.cell_geometry
    t = np.concatenate([[-1.0, 1.0], gauss_legendre_rule(7).nodes])
    XI, ETA = np.meshgrid(t, t, indexing="ij")
    X = x0[:, None] + 0.5 * h[:, None] * (XI.ravel() + 1.0)
    Y = y0[:, None] + 0.5 * k[:, None] * (ETA.ravel() + 1.0)
    return np.max(np.abs(_on_cells(fn, X, Y)), axis=1)


@dataclass(frozen=True, eq=False)
class StabilizationPlan:
    """Per-cell stabilization weights.

    ``delta`` holds one value per cell (cell order of DofMap).  For the
    bubble variant the weight inside a cell is delta * (1 - xi^2) / 4 with xi
    the reference x-coordinate, i.e. the quadratic x-bubble scaled so that
    delta = min{h/(2 eps), 1/|b|_inf} * h.
    """

    method: str
    delta: np.ndarray
    region_delta: dict = field(default_factory=dict)
    bubble: bool = False
    C_SD: float = 1.0
    C_LPS: float = 0.001
    mu: float = 0.0
    clamped: bool = False

    def weight_at(self, xi_points: np.ndarray) -> np.ndarray:
        """delta at reference points with x-coordinates ``xi_points``; (ncells, npts)."""
        if self.bubble:
            return self.delta[:, None] * (0.25 * (1.0 - xi_points**2))[None, :]
        return np.broadcast_to(self.delta[:, None], (self.delta.size, xi_points.size))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.delta)


def make_stab_plan(method: str, mesh: TensorMesh, space: LocalSpace, problem: Problem,
                   epsilon: float | None = None, C_SD: float = 1.0, C_LPS: float = 0.001,
                   sd_set: int = 2, clamp: bool = True) -> StabilizationPlan:
    """Stabilization weights for ``method`` on an S-type mesh."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    eps = problem.epsilon if epsilon is None else epsilon
    dm = DofMap(mesh, space)
    ncells = dm.ncells
    if method == "galerkin":
        return StabilizationPlan(method, np.zeros(ncells), {r: 0.0 for r in Region})

    if method == "modsdfem":
        _, _, h, _ = dm.cell_geometry
        bsup = _cell_sup(problem.b, dm)
        amp = np.minimum(h / (2.0 * eps), 1.0 / bsup) * h
        return StabilizationPlan(method, amp, {}, bubble=True, C_SD=C_SD)

    if mesh.spec is None:
        raise ValueError("SDFEM/LPS parameters are defined through an S-type mesh")
    N = mesh.N
    tags = mesh.region_tags().ravel()
    if method == "sdfem":
        if sd_set == 1:
            d11, d21 = C_SD, C_SD * eps**-0.5 * N**-2.0
        elif sd_set == 2:
            d11, d21 = C_SD / N, C_SD * eps**-0.5 * N**-3.0
        else:
            raise ValueError("sd_set must be 1 or 2")
    else:
        mpsi = mesh.spec.family.max_abs_psi_prime(N)
        d11 = C_LPS * N**-2.0 * mpsi ** (2 * space.p)
        d21 = C_LPS * eps**-0.5 / math.log(N) * (mpsi / N) ** 2
    region = {Region.OMEGA11: d11, Region.OMEGA21: d21, Region.OMEGA12: 0.0, Region.OMEGA22: 0.0}
    delta = np.array([region[Region(t)] for t in tags], dtype=float)

    mu = 0.0
    clamped = False
    if method == "sdfem" and clamp:
        mu = inverse_inequality_constant(space)
        _, _, h, k = dm.cell_geometry
        csup = _cell_sup(problem.c, dm)
        with np.errstate(divide="ignore"):
            cap_c = np.where(csup > 0, problem.gamma / csup**2, np.inf)
            cap_h = np.minimum(h, k) ** 2 / (mu**2 * eps) if mu > 0 else np.full(ncells, np.inf)
        cap = 0.5 * np.minimum(cap_c, cap_h)
        clamped = bool(np.any(delta > cap))
        delta = np.minimum(delta, cap)
    return StabilizationPlan(method, delta, region, C_SD=C_SD, C_LPS=C_LPS, mu=mu, clamped=clamped)


@dataclass(frozen=True)
class _Reference:
    """Basis data on the reference quadrature grid."""

    xi: np.ndarray
    eta: np.ndarray
    w2: np.ndarray
    B: dict
    kappa: np.ndarray  # fluctuation operator id - L2 projection onto P_{p-2}


def _reference(space: LocalSpace, n: int | None = None) -> _Reference:
    n = quadrature_order(space.p) if n is None else n
    q = gauss_legendre_rule(n)
    B = eval_basis_tensor(space, q.nodes, q.nodes, derivs=2)
    XI, ETA = np.meshgrid(q.nodes, q.nodes, indexing="ij")
    w2 = np.outer(q.weights, q.weights).ravel()
    return _Reference(XI.ravel(), ETA.ravel(), w2, B, fluctuation_operator(space.p, q.nodes, q.weights))


def fluctuation_operator(p: int, nodes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """kappa = id - pi on the tensor quadrature grid, pi the L2 projection onto P_{p-2}.

    The projection is affine invariant, so one reference matrix serves all cells.
    """
    nq = nodes.size**2
    if p < 2:
        return np.eye(nq)
    L = legendre_table(p - 2, nodes, 0)[0]
    cols = [np.outer(L[a], L[b]).ravel() for a in range(p - 1) for b in range(p - 1 - a)]
    Q = np.stack(cols, axis=1)
    D = np.outer(weights, weights).ravel()
    G = Q.T @ (D[:, None] * Q)
    P = Q @ np.linalg.solve(G, Q.T * D)
    return np.eye(nq) - P


def _trial_from_basis(ref: _Reference, sx, sy):
    B = ref.B
    return {"v": np.broadcast_to(B["v"], (sx.size,) + B["v"].shape),
            "x": sx[:, None, None] * B["x"],
            "y": sy[:, None, None] * B["y"],
            "lap": sx[:, None, None] ** 2 * B["xx"] + sy[:, None, None] ** 2 * B["yy"]}


def _element_operator(problem: Problem, eps: float, plan: StabilizationPlan, ref: _Reference,
                      W, bq, cq, dq, sx, sy, trial: dict, parts=("gal", "stab")) -> np.ndarray:
    """Element contributions a(trial, phi_d) for a chunk of cells; (nc, dim, m)."""
    Tv = ref.B["v"]
    Tx = sx[:, None, None] * ref.B["x"]
    Ty = sy[:, None, None] * ref.B["y"]
    U, Ux, Uy = trial["v"], trial["x"], trial["y"]
    out = np.zeros((W.shape[0], Tv.shape[1], U.shape[2]))
    if "gal" in parts:
        out = out + (np.swapaxes(Tx * (eps * W)[:, :, None], 1, 2) @ Ux
               + np.swapaxes(Ty * (eps * W)[:, :, None], 1, 2) @ Uy
               + np.swapaxes(W[:, :, None] * Tv[None], 1, 2)
               @ (-bq[:, :, None] * Ux + cq[:, :, None] * U))
    if "stab" in parts and plan.method in ("sdfem", "modsdfem"):
        R = eps * trial["lap"] + bq[:, :, None] * Ux - cq[:, :, None] * U
        out = out + np.swapaxes(Tx * (W * dq * bq)[:, :, None], 1, 2) @ R
    if "stab" in parts and plan.method == "lps":
        Kt = ref.kappa @ (bq[:, :, None] * Tx)
        Ku = ref.kappa @ (bq[:, :, None] * Ux)
        out = out + np.swapaxes(Kt * (W * dq)[:, :, None], 1, 2) @ Ku
    return out


def _chunks(n: int):
    for s in range(0, n, CHUNK):
        yield slice(s, min(n, s + CHUNK))


def _cell_data(problem: Problem, dm: DofMap, plan: StabilizationPlan, ref: _Reference, sl):
    x0, y0, h, k = (g[sl] for g in dm.cell_geometry)
    X = x0[:, None] + 0.5 * h[:, None] * (ref.xi + 1.0)
    Y = y0[:, None] + 0.5 * k[:, None] * (ref.eta + 1.0)
    W = 0.25 * (h * k)[:, None] * ref.w2
    bq = _on_cells(problem.b, X, Y)
    cq = _on_cells(problem.c, X, Y)
    dq = plan.weight_at(ref.xi)[sl]
    return X, Y, W, bq, cq, dq, 2.0 / h, 2.0 / k


@dataclass(eq=False)
class LinearSystem:
    matrix: sp.csr_matrix  # over interior dofs
    rhs: np.ndarray
    dofmap: DofMap
    plan: StabilizationPlan

    def dump_coo(self, path) -> None:
        """Write the matrix as 'row col value' lines (0-based interior indices)."""
        A = self.matrix.tocoo()
        with open(path, "w") as fh:
            fh.write(f"# {A.shape[0]} {A.shape[1]} {A.nnz}\n")
            for r, c, v in zip(A.row, A.col, A.data):
                fh.write(f"{r} {c} {v:.17g}\n")


def assemble(problem: Problem, mesh: TensorMesh, space: LocalSpace,
             plan: StabilizationPlan | None = None, epsilon: float | None = None) -> LinearSystem:
    """Assemble the discrete system with homogeneous Dirichlet dofs eliminated."""
    eps = problem.epsilon if epsilon is None else epsilon
    dm = DofMap(mesh, space)
    if plan is None:
        plan = StabilizationPlan("galerkin", np.zeros(dm.ncells))
    if plan.delta.size != dm.ncells:
        raise ValueError("stabilization plan does not match the mesh")
    ref = _reference(space)
    d = space.dim
    rows, cols, vals = [], [], []
    F = np.zeros(dm.n_dofs)
    for sl in _chunks(dm.ncells):
        X, Y, W, bq, cq, dq, sx, sy = _cell_data(problem, dm, plan, ref, sl)
        Ae = _element_operator(problem, eps, plan, ref, W, bq, cq, dq, sx, sy,
                               _trial_from_basis(ref, sx, sy))
        fq = _on_cells(problem.f, X, Y)
        Fe = (W * fq) @ ref.B["v"]
        if plan.method in ("sdfem", "modsdfem"):
            Fe -= ((W * dq * fq * bq)[:, :, None] * (sx[:, None, None] * ref.B["x"])).sum(axis=1)
        g = dm.cell_dofs[sl]
        rows.append(np.repeat(g, d, axis=1).ravel())
        cols.append(np.tile(g, (1, d)).ravel())
        vals.append(Ae.ravel())
        np.add.at(F, g.ravel(), Fe.ravel())
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dm.n_dofs, dm.n_dofs)).tocsr()
    A.sum_duplicates()
    inner = dm.interior_dofs
    A = A[inner][:, inner].tocsr()
    A.eliminate_zeros()
    return LinearSystem(A, F[inner], dm, plan)


def solve(system: LinearSystem, tol: float = 1e-10) -> DiscreteField:
    """Sparse LU solve; boundary dofs are set to zero."""
    A, b = system.matrix, system.rhs
    dm = system.dofmap
    coeffs = np.zeros(dm.n_dofs)
    if not np.any(b):
        return DiscreteField(dm, coeffs)
    try:
        lu = spla.splu(A.tocsc())
    except RuntimeError as exc:
        raise NumericalFailure(f"factorization failed for n={A.shape[0]}, nnz={A.nnz}: {exc}")
    x = lu.solve(b)
    res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
    if res > tol:  # one step of iterative refinement
        x += lu.solve(b - A @ x)
        res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
    if not np.isfinite(res) or res > tol:
        raise NumericalFailure(f"relative residual {res:.3e} exceeds {tol:g} "
                               f"(n={A.shape[0]}, nnz={A.nnz})")
    coeffs[dm.interior_dofs] = x
    return DiscreteField(dm, coeffs)


def form_action(problem: Problem, dm: DofMap, plan: StabilizationPlan, fields: Callable,
                epsilon: float | None = None, parts=("gal", "stab")) -> np.ndarray:
    """Vector a(w, phi_k) over all global basis functions phi_k.

    ``fields(X, Y, sl)`` returns a dict with "v", "x", "y", "lap" arrays of
    shape (ncells_in_chunk, nq) holding w and its derivatives at the assembly
    quadrature points of the cells in slice ``sl``.
    """
    eps = problem.epsilon if epsilon is None else epsilon
    ref = _reference(dm.space)
    out = np.zeros(dm.n_dofs)
    for sl in _chunks(dm.ncells):
        X, Y, W, bq, cq, dq, sx, sy = _cell_data(problem, dm, plan, ref, sl)
        w = fields(X, Y, sl)
        trial = {k: np.asarray(w[k])[:, :, None] for k in ("v", "x", "y", "lap")}
        Ae = _element_operator(problem, eps, plan, ref, W, bq, cq, dq, sx, sy, trial, parts)
        np.add.at(out, dm.cell_dofs[sl].ravel(), Ae[:, :, 0].ravel())
    return out


def exact_fields(exact: ExactSolution) -> Callable:
    """Adapter turning an ExactSolution into a ``form_action`` field callback."""
    def fields(X, Y, sl):
        lap = 0.0
        if exact.uxx is not None:
            lap = _on_cells(exact.uxx, X, Y) + _on_cells(exact.uyy, X, Y)
        return {"v": _on_cells(exact.u, X, Y), "x": _on_cells(exact.ux, X, Y),
                "y": _on_cells(exact.uy, X, Y), "lap": np.broadcast_to(lap, X.shape)}
    return fields


def discrete_fields(u: DiscreteField) -> Callable:
    """Adapter evaluating a DiscreteField at the assembly quadrature points."""
    q = gauss_legendre_rule(quadrature_order(u.space.p))
    vals = u.eval_tensor(q.nodes, derivs=2)
    vals["lap"] = vals["xx"] + vals["yy"]

    def fields(X, Y, sl):
        return {k: vals[k][sl] for k in ("v", "x", "y", "lap")}
    return fields


def solve_problem(problem: Problem, mesh: TensorMesh, space: LocalSpace, method: str = "galerkin",
                  **plan_kwargs) -> tuple[DiscreteField, StabilizationPlan]:
    plan = make_stab_plan(method, mesh, space, problem, **plan_kwargs)
    return solve(assemble(problem, mesh, space, plan)), plan
