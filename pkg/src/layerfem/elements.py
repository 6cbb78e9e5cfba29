"""Reference-element spaces, shape functions and 1-D point sets.

All spaces live on the reference square [-1, 1]^2 and are spanned by the
products L_a(xi) L_b(eta) of Legendre polynomials over a downward-closed index
set; this gives the same span as the corresponding monomials but a far better
conditioned local system for p up to 8.

The index set of Q_p^club is

* vertex/edge block: a <= 1 or b <= 1 (with a, b <= p), 4p functions,
* interior block: (2 + i, 2 + j) for i = 0..p-2, j = 0..s_i.

Shape functions are the dual basis of the vertex-edge-cell functionals
(vertex values, edge moments against L_0..L_{p-2}, interior moments against
L_i(xi) L_j(eta) with j <= s_i). With these degrees of freedom the trace of a
shape function on an edge depends only on that edge's functionals, so the
global space is continuous without any sign or orientation bookkeeping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

MAX_DEGREE = 8
NEWTON_MAXITER = 100


def legendre_table(n: int, t, derivs: int = 2) -> np.ndarray:
    """Values of L_0..L_n and their first ``derivs`` derivatives at ``t``.

    Returns an array of shape (derivs + 1, n + 1, len(t)).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((derivs + 1, n + 1, t.size))
    out[0, 0] = 1.0
    if n >= 1:
        out[0, 1] = t
        if derivs >= 1:
            out[1, 1] = 1.0
    for k in range(1, n):
        out[0, k + 1] = ((2 * k + 1) * t * out[0, k] - k * out[0, k - 1]) / (k + 1)
        # L'_{k+1} = L'_{k-1} + (2k+1) L_k, same shape for the second derivative
        for d in range(1, derivs + 1):
            out[d, k + 1] = out[d, k - 1] + (2 * k + 1) * out[d - 1, k]
    return out


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.nodes.size


def _newton_roots(f_df, guesses: np.ndarray, what: str) -> np.ndarray:
    x = guesses.copy()
    for _ in range(NEWTON_MAXITER):
        f, df = f_df(x)
        dx = f / df
        x -= dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    else:
        if np.max(np.abs(dx)) > 1e-13:
            raise RuntimeError(f"Newton iteration for {what} did not converge")
    return x


@lru_cache(maxsize=None)
def gauss_legendre_rule(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1] (exact up to degree 2n - 1)."""
    if n < 1:
        raise ValueError("need at least one quadrature point")
    k = np.arange(1, n + 1)
    guess = -np.cos((2 * k - 1) * np.pi / (2 * n))  # Chebyshev nodes, ascending

    def f_df(x):
        tab = legendre_table(n, x, 1)
        return tab[0, n], tab[1, n]

    x = _newton_roots(f_df, guess, f"Gauss-Legendre nodes (n={n})")
    x = 0.5 * (x - x[::-1])  # exact symmetry
    if n % 2:
        x[n // 2] = 0.0
    dP = legendre_table(n, x, 1)[1, n]
    w = 2.0 / ((1.0 - x**2) * dP**2)
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w)


@lru_cache(maxsize=None)
def gauss_lobatto_points(p: int) -> np.ndarray:
    """The p + 1 zeros of (1 - t^2) L_p'(t), ascending."""
    if p < 1:
        raise ValueError("p must be at least 1")
    pts = np.empty(p + 1)
    pts[0], pts[-1] = -1.0, 1.0
    if p >= 2:
        k = np.arange(1, p)
        guess = -np.cos(np.pi * k / p)  # Chebyshev-Gauss-Lobatto interior points

        def f_df(x):
            tab = legendre_table(p, x, 2)
            return tab[1, p], tab[2, p]

        x = _newton_roots(f_df, guess, f"Gauss-Lobatto points (p={p})")
        x = 0.5 * (x - x[::-1])
        if (p - 1) % 2:
            x[(p - 1) // 2] = 0.0
        pts[1:-1] = x
    pts.setflags(write=False)
    return pts


def equidistant_points(p: int) -> np.ndarray:
    return -1.0 + 2.0 * np.arange(p + 1) / p


def quadrature_order(p: int) -> int:
    """Points per direction used for assembly and norms."""
    return max(6, p + 2)


@dataclass(frozen=True)
class LocalSpace:
    """Q_p^club on the reference square.

    ``s`` holds s_0..s_{p-2}; negative entries mean the row is absent.
    """

    p: int
    kind: str
    s: tuple

    def __post_init__(self):
        if not 1 <= self.p <= MAX_DEGREE:
            raise ValueError(f"degree must be in 1..{MAX_DEGREE}, got {self.p}")
        if len(self.s) != max(self.p - 1, 0):
            raise ValueError("s must have p - 1 entries")
        if any(a < b for a, b in zip(self.s, self.s[1:])):
            raise ValueError("s must be nonincreasing")
        if any(si > self.p - 2 for si in self.s):
            raise ValueError("s_i may not exceed p - 2")

    @classmethod
    def full(cls, p: int) -> "LocalSpace":
        return cls(p, "full", tuple([p - 2] * (p - 1)))

    @classmethod
    def serendipity(cls, p: int) -> "LocalSpace":
        return cls(p, "serendipity", tuple(p - 4 - i for i in range(p - 1)))

    @classmethod
    def general(cls, p: int, s) -> "LocalSpace":
        return cls(p, "general", tuple(int(v) for v in s))

    @classmethod
    def make(cls, kind: str, p: int) -> "LocalSpace":
        if kind == "full":
            return cls.full(p)
        if kind == "serendipity":
            return cls.serendipity(p)
        raise ValueError(f"unknown space kind {kind!r}")

    @property
    def interior_pairs(self) -> list[tuple[int, int]]:
        """(i, j) with j <= s_i; the interior block is xi^2 eta^2 xi^i eta^j."""
        return [(i, j) for i, si in enumerate(self.s) for j in range(si + 1)]

    @property
    def n_interior(self) -> int:
        return len(self.interior_pairs)

    @property
    def dim(self) -> int:
        return 4 * self.p + self.n_interior

    @property
    def index_set(self) -> list[tuple[int, int]]:
        p = self.p
        idx = [(a, b) for a in range(2) for b in range(p + 1)]
        idx += [(a, b) for a in range(2, p + 1) for b in range(2)]
        idx += [(2 + i, 2 + j) for i, j in self.interior_pairs]
        return idx


def space_dimension(space: LocalSpace) -> int:
    return space.dim


# Local degree-of-freedom layout: 4 vertices, bottom, top, left, right edges
# (p - 1 each), interior.  Vertices are ordered (-1,-1), (1,-1), (-1,1), (1,1).
VERTICES = ((-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0))
EDGES = ("bottom", "top", "left", "right")


def local_layout(space: LocalSpace) -> dict:
    p = space.p
    ne = p - 1
    out = {"vertex": np.arange(4)}
    for k, name in enumerate(EDGES):
        out[name] = np.arange(4 + k * ne, 4 + (k + 1) * ne)
    out["interior"] = np.arange(4 + 4 * ne, space.dim)
    return out


def eval_modal(space: LocalSpace, xi, eta, derivs: int = 1) -> dict:
    """Modal functions L_a(xi) L_b(eta) and derivatives at points (xi, eta).

    Returns a dict with keys among "v", "x", "y", "xx", "yy", "xy"; each an
    array of shape (npts, dim).
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    p = space.p
    A = legendre_table(p, xi, derivs)
    B = legendre_table(p, eta, derivs)
    a = np.array([ab[0] for ab in space.index_set])
    b = np.array([ab[1] for ab in space.index_set])
    out = {"v": (A[0, a] * B[0, b]).T}
    if derivs >= 1:
        out["x"] = (A[1, a] * B[0, b]).T
        out["y"] = (A[0, a] * B[1, b]).T
    if derivs >= 2:
        out["xx"] = (A[2, a] * B[0, b]).T
        out["yy"] = (A[0, a] * B[2, b]).T
        out["xy"] = (A[1, a] * B[1, b]).T
    return out


def _functional_rows(space: LocalSpace, evaluate) -> np.ndarray:
    """Apply the vertex-edge-cell functionals to the columns of ``evaluate``.

    ``evaluate(xi, eta)`` must return an (npts, m) array; the result is
    (dim, m).  Edge moments use a (p+1)-point Gauss rule, interior moments
    the assembly rule.
    """
    p = space.p
    rows = [evaluate(np.array([v[0] for v in VERTICES]), np.array([v[1] for v in VERTICES]))]
    if p >= 2:
        ge = gauss_legendre_rule(p + 1)
        Lk = legendre_table(p - 2, ge.nodes, 0)[0] * ge.weights  # (p-1, nq)
        one = np.ones_like(ge.nodes)
        for xi, eta in ((ge.nodes, -one), (ge.nodes, one), (-one, ge.nodes), (one, ge.nodes)):
            rows.append(Lk @ evaluate(xi, eta))
    if space.n_interior:
        q = gauss_legendre_rule(quadrature_order(p))
        XI, ETA = np.meshgrid(q.nodes, q.nodes, indexing="ij")
        W = np.outer(q.weights, q.weights).ravel()
        La = legendre_table(p, q.nodes, 0)[0]
        ii = np.array([ij[0] for ij in space.interior_pairs])
        jj = np.array([ij[1] for ij in space.interior_pairs])
        test = (La[ii][:, :, None] * La[jj][:, None, :]).reshape(len(ii), -1) * W
        rows.append(test @ evaluate(XI.ravel(), ETA.ravel()))
    return np.vstack(rows)


@lru_cache(maxsize=None)
def dual_coefficients(space: LocalSpace) -> np.ndarray:
    """Modal coefficients of the shape functions, shape (dim, dim).

    Column k holds the expansion of shape function k.
    """
    Phi = _functional_rows(space, lambda xi, eta: eval_modal(space, xi, eta, 0)["v"])
    cond = np.linalg.cond(Phi)
    if not np.isfinite(cond) or cond > 1e10:
        raise np.linalg.LinAlgError(f"vertex-edge-cell functionals not unisolvent (cond={cond:.3e})")
    C = np.linalg.inv(Phi)
    C.setflags(write=False)
    return C


def functionals_of(space: LocalSpace, f) -> np.ndarray:
    """Vertex-edge-cell functionals of a reference-square function f(xi, eta).

    f may return shape (npts,) or (npts, m).
    """
    def ev(xi, eta):
        v = np.asarray(f(xi, eta), dtype=float)
        return v[:, None] if v.ndim == 1 else v
    out = _functional_rows(space, ev)
    return out[:, 0] if out.shape[1] == 1 else out


def eval_basis(space: LocalSpace, xi, eta, derivs: int = 1) -> dict:
    """Shape functions and derivatives at points; arrays of shape (npts, dim)."""
    C = dual_coefficients(space)
    return {k: v @ C for k, v in eval_modal(space, xi, eta, derivs).items()}


def eval_basis_tensor(space: LocalSpace, xi1d, eta1d, derivs: int = 1) -> dict:
    """eval_basis on the tensor grid xi1d x eta1d, points ordered xi-major."""
    XI, ETA = np.meshgrid(xi1d, eta1d, indexing="ij")
    return eval_basis(space, XI.ravel(), ETA.ravel(), derivs)


def lagrange_nodes(space: LocalSpace, family: str) -> tuple[np.ndarray, np.ndarray]:
    """Nodes of the Lagrange interpolant in local dof order.

    4 vertices, p - 1 nodes per edge (bottom, top, left, right) and interior
    nodes (t_{i+1}, t_{j+1}) for j <= s_i.
    """
    p = space.p
    if family in ("equidistant", "eq"):
        t = equidistant_points(p)
    elif family in ("gauss-lobatto", "gl"):
        t = gauss_lobatto_points(p)
    else:
        raise ValueError(f"unknown node family {family!r}")
    xi = [v[0] for v in VERTICES]
    eta = [v[1] for v in VERTICES]
    inner = list(t[1:-1])
    for e in EDGES:
        if e in ("bottom", "top"):
            xi += inner
            eta += [-1.0 if e == "bottom" else 1.0] * (p - 1)
        else:
            xi += [-1.0 if e == "left" else 1.0] * (p - 1)
            eta += inner
    for i, j in space.interior_pairs:
        xi.append(t[i + 1])
        eta.append(t[j + 1])
    return np.array(xi), np.array(eta)


@lru_cache(maxsize=None)
def lagrange_to_dofs(space: LocalSpace, family: str) -> np.ndarray:
    """Matrix mapping nodal values to local dof values of the interpolant."""
    xi, eta = lagrange_nodes(space, family)
    Lam = eval_modal(space, xi, eta, 0)["v"]
    cond = np.linalg.cond(Lam)
    if not np.isfinite(cond) or cond > 1e10:
        raise np.linalg.LinAlgError(f"Lagrange nodes not unisolvent (cond={cond:.3e})")
    modal = np.linalg.inv(Lam)  # nodal values -> modal coefficients
    Phi = np.linalg.inv(dual_coefficients(space))
    T = Phi @ modal
    T.setflags(write=False)
    return T


@lru_cache(maxsize=None)
def inverse_inequality_constant(space: LocalSpace) -> float:
    """mu with ||Delta v||_tau <= mu h^-1 ||grad v||_tau on a square of side h.

    Computed from the largest generalized eigenvalue of the Laplacian Gram
    matrix against the gradient Gram matrix on the reference square (side 2),
    constants removed.
    """
    q = gauss_legendre_rule(quadrature_order(space.p) + 1)
    XI, ETA = np.meshgrid(q.nodes, q.nodes, indexing="ij")
    W = np.outer(q.weights, q.weights).ravel()
    m = eval_modal(space, XI.ravel(), ETA.ravel(), 2)
    keep = [k for k, ab in enumerate(space.index_set) if ab != (0, 0)]
    lap = (m["xx"] + m["yy"])[:, keep]
    gx, gy = m["x"][:, keep], m["y"][:, keep]
    A = lap.T @ (W[:, None] * lap)
    B = gx.T @ (W[:, None] * gx) + gy.T @ (W[:, None] * gy)
    lam = scipy.linalg.eigh(A, B, eigvals_only=True)
    return 2.0 * math.sqrt(max(lam[-1], 0.0))
