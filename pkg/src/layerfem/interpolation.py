"""Global degree-of-freedom maps, discrete fields and interpolation operators.

Three interpolants into the continuous finite element space are provided:
the vertex-edge-cell interpolant ``interpolate_vec`` and the Lagrange
interpolants ``interpolate_lagrange`` with equidistant or Gauss-Lobatto nodes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .elements import (LocalSpace, dual_coefficients, eval_basis, eval_basis_tensor,
                       gauss_legendre_rule, lagrange_nodes, lagrange_to_dofs, legendre_table,
                       quadrature_order)
from .mesh import TensorMesh


class DofMap:
    """Global numbering for a continuous Q_p^club space on a tensor mesh.

    Order: vertices, horizontal edges (along x), vertical edges (along y),
    cell interiors.  Cell (i, j) has linear index c = i * Ny + j.
    """

    def __init__(self, mesh: TensorMesh, space: LocalSpace):
        self.mesh = mesh
        self.space = space
        Nx, Ny, p = mesh.Nx, mesh.Ny, space.p
        ne, ni = p - 1, space.n_interior
        self.n_vertex = (Nx + 1) * (Ny + 1)
        self.off_hedge = self.n_vertex
        self.off_vedge = self.off_hedge + Nx * (Ny + 1) * ne
        self.off_interior = self.off_vedge + (Nx + 1) * Ny * ne
        self.n_dofs = self.off_interior + Nx * Ny * ni

    @property
    def ncells(self) -> int:
        return self.mesh.Nx * self.mesh.Ny

    def vertex_id(self, i, j):
        return np.asarray(i) * (self.mesh.Ny + 1) + np.asarray(j)

    def hedge_ids(self, i, j):
        """Dofs of the horizontal edge [x_i, x_{i+1}] x {y_j}, shape (..., p-1)."""
        ne = self.space.p - 1
        base = self.off_hedge + (np.asarray(i) * (self.mesh.Ny + 1) + np.asarray(j)) * ne
        return base[..., None] + np.arange(ne)

    def vedge_ids(self, i, j):
        """Dofs of the vertical edge {x_i} x [y_j, y_{j+1}]."""
        ne = self.space.p - 1
        base = self.off_vedge + (np.asarray(i) * self.mesh.Ny + np.asarray(j)) * ne
        return base[..., None] + np.arange(ne)

    def interior_ids(self, i, j):
        ni = self.space.n_interior
        base = self.off_interior + (np.asarray(i) * self.mesh.Ny + np.asarray(j)) * ni
        return base[..., None] + np.arange(ni)

    @cached_property
    def cell_indices(self) -> tuple[np.ndarray, np.ndarray]:
        ii, jj = np.meshgrid(np.arange(self.mesh.Nx), np.arange(self.mesh.Ny), indexing="ij")
        return ii.ravel(), jj.ravel()

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        """Local-to-global map, shape (ncells, dim), in local dof order."""
        i, j = self.cell_indices
        blocks = [np.stack([self.vertex_id(i, j), self.vertex_id(i + 1, j),
                            self.vertex_id(i, j + 1), self.vertex_id(i + 1, j + 1)], axis=1),
                  self.hedge_ids(i, j), self.hedge_ids(i, j + 1),
                  self.vedge_ids(i, j), self.vedge_ids(i + 1, j),
                  self.interior_ids(i, j)]
        out = np.concatenate(blocks, axis=1)
        out.setflags(write=False)
        return out

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        Nx, Ny = self.mesh.Nx, self.mesh.Ny
        mask = np.zeros(self.n_dofs, dtype=bool)
        iv, jv = np.meshgrid(np.arange(Nx + 1), np.arange(Ny + 1), indexing="ij")
        on = (iv == 0) | (iv == Nx) | (jv == 0) | (jv == Ny)
        mask[self.vertex_id(iv[on], jv[on])] = True
        if self.space.p > 1:
            mask[self.hedge_ids(np.arange(Nx), 0).ravel()] = True
            mask[self.hedge_ids(np.arange(Nx), Ny).ravel()] = True
            mask[self.vedge_ids(0, np.arange(Ny)).ravel()] = True
            mask[self.vedge_ids(Nx, np.arange(Ny)).ravel()] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def interior_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @cached_property
    def cell_geometry(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(x0, y0, h, k) per cell: lower-left corner and side lengths."""
        i, j = self.cell_indices
        m = self.mesh
        return m.x[i], m.y[j], m.hx[i], m.ky[j]


def cell_quadrature(dofmap: DofMap, n: int | None = None):
    """Tensor Gauss rule mapped to every cell.

    Returns (xi1d, X, Y, W) where X, Y, W have shape (ncells, n*n) with points
    ordered xi-major, matching ``eval_basis_tensor``.
    """
    n = quadrature_order(dofmap.space.p) if n is None else n
    q = gauss_legendre_rule(n)
    x0, y0, h, k = dofmap.cell_geometry
    XI, ETA = np.meshgrid(q.nodes, q.nodes, indexing="ij")
    w2 = np.outer(q.weights, q.weights).ravel()
    X = x0[:, None] + 0.5 * h[:, None] * (XI.ravel() + 1.0)
    Y = y0[:, None] + 0.5 * k[:, None] * (ETA.ravel() + 1.0)
    W = 0.25 * (h * k)[:, None] * w2
    return q.nodes, X, Y, W


@dataclass(eq=False)
class DiscreteField:
    dofmap: DofMap
    coeffs: np.ndarray

    @property
    def mesh(self) -> TensorMesh:
        return self.dofmap.mesh

    @property
    def space(self) -> LocalSpace:
        return self.dofmap.space

    @property
    def cell_geometry(self):
        return self.dofmap.cell_geometry

    @property
    def degree(self) -> int:
        return self.space.p

    def local_coeffs(self) -> np.ndarray:
        return self.coeffs[self.dofmap.cell_dofs]

    def eval_tensor(self, xi1d, eta1d=None, derivs: int = 1) -> dict:
        """Values and physical derivatives on a reference tensor grid per cell.

        Arrays have shape (ncells, len(xi1d) * len(eta1d)).
        """
        eta1d = xi1d if eta1d is None else eta1d
        B = eval_basis_tensor(self.space, xi1d, eta1d, derivs)
        return self._apply(B)

    def _apply(self, B: dict) -> dict:
        lc = self.local_coeffs()
        _, _, h, k = self.dofmap.cell_geometry
        sx, sy = (2.0 / h)[:, None], (2.0 / k)[:, None]
        out = {"v": lc @ B["v"].T}
        if "x" in B:
            out["x"] = sx * (lc @ B["x"].T)
            out["y"] = sy * (lc @ B["y"].T)
        if "xx" in B:
            out["xx"] = sx**2 * (lc @ B["xx"].T)
            out["yy"] = sy**2 * (lc @ B["yy"].T)
            out["xy"] = sx * sy * (lc @ B["xy"].T)
        return out

    def __call__(self, x, y, derivs: int = 0):
        """Point evaluation; returns values (derivs=0) or a dict (derivs>0)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        x, y = np.broadcast_to(x, shape).ravel(), np.broadcast_to(y, shape).ravel()
        m = self.mesh
        i = np.clip(np.searchsorted(m.x, x, side="right") - 1, 0, m.Nx - 1)
        j = np.clip(np.searchsorted(m.y, y, side="right") - 1, 0, m.Ny - 1)
        h, k = m.hx[i], m.ky[j]
        xi = 2.0 * (x - m.x[i]) / h - 1.0
        eta = 2.0 * (y - m.y[j]) / k - 1.0
        B = eval_basis(self.space, xi, eta, derivs)
        lc = self.coeffs[self.dofmap.cell_dofs[i * m.Ny + j]]
        vals = {"v": np.einsum("nd,nd->n", lc, B["v"])}
        if derivs >= 1:
            vals["x"] = 2.0 / h * np.einsum("nd,nd->n", lc, B["x"])
            vals["y"] = 2.0 / k * np.einsum("nd,nd->n", lc, B["y"])
        if derivs == 0:
            return vals["v"].reshape(shape)
        return {key: v.reshape(shape) for key, v in vals.items()}

    def sample_grid(self, per_cell: int = 5) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Values on a uniform per-cell sample grid; returns (X, Y, V) per cell."""
        t = np.linspace(-1.0, 1.0, per_cell)
        x0, y0, h, k = self.dofmap.cell_geometry
        XI, ETA = np.meshgrid(t, t, indexing="ij")
        X = x0[:, None] + 0.5 * h[:, None] * (XI.ravel() + 1.0)
        Y = y0[:, None] + 0.5 * k[:, None] * (ETA.ravel() + 1.0)
        return X, Y, self.eval_tensor(t, derivs=0)["v"]


def _edge_moment_weights(p: int):
    # the assembly rule is exact for the P_p x P_{p-2} integrands (like the
    # minimal p+1 point rule) and keeps moments of non-polynomial data accurate
    ge = gauss_legendre_rule(quadrature_order(p))
    return ge.nodes, legendre_table(p - 2, ge.nodes, 0)[0] * ge.weights


def _eval(f, X, Y) -> np.ndarray:
    """f(X, Y) broadcast to the shape of the points, for callables ignoring a variable."""
    return np.broadcast_to(np.asarray(f(X, Y), dtype=float), np.broadcast(X, Y).shape)


def interpolate_vec(f, mesh: TensorMesh, space: LocalSpace) -> DiscreteField:
    """Vertex-edge-cell interpolant of f(x, y) (vectorized callable).

    Vertex values, edge moments against P_{p-2} and interior moments against
    the interior block are matched.  Since every functional lives on a single
    global entity, the result is continuous by construction.
    """
    dm = DofMap(mesh, space)
    dual_coefficients(space)  # unisolvence guard
    p = space.p
    c = np.zeros(dm.n_dofs)
    X, Y = np.meshgrid(mesh.x, mesh.y, indexing="ij")
    c[dm.vertex_id(*np.meshgrid(np.arange(mesh.Nx + 1), np.arange(mesh.Ny + 1),
                                indexing="ij"))] = _eval(f, X, Y)
    if p >= 2:
        t, Lw = _edge_moment_weights(p)
        # horizontal edges: x mapped from xi, y = y_j
        xm = mesh.x[:-1, None] + 0.5 * mesh.hx[:, None] * (t + 1.0)  # (Nx, nq)
        vals = _eval(f, xm[:, None, :], mesh.y[None, :, None])  # (Nx, Ny+1, nq)
        ii, jj = np.meshgrid(np.arange(mesh.Nx), np.arange(mesh.Ny + 1), indexing="ij")
        c[dm.hedge_ids(ii, jj)] = vals @ Lw.T
        ym = mesh.y[:-1, None] + 0.5 * mesh.ky[:, None] * (t + 1.0)
        vals = _eval(f, mesh.x[:, None, None], ym[None, :, :])  # (Nx+1, Ny, nq)
        ii, jj = np.meshgrid(np.arange(mesh.Nx + 1), np.arange(mesh.Ny), indexing="ij")
        c[dm.vedge_ids(ii, jj)] = vals @ Lw.T
    if space.n_interior:
        nodes, Xq, Yq, _ = cell_quadrature(dm)
        q = gauss_legendre_rule(nodes.size)
        La = legendre_table(p, nodes, 0)[0] * q.weights
        ip = space.interior_pairs
        test = np.stack([np.outer(La[i], La[j]).ravel() for i, j in ip])
        i, j = dm.cell_indices
        c[dm.interior_ids(i, j)] = _eval(f, Xq, Yq) @ test.T
    return DiscreteField(dm, c)


def _scatter_checked(dm: DofMap, local: np.ndarray, tol: float = 1e-11) -> np.ndarray:
    """Write per-cell dof values into the global vector, asserting agreement."""
    idx = dm.cell_dofs.ravel()
    vals = local.ravel()
    c = np.zeros(dm.n_dofs)
    c[idx] = vals
    scale = max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
    mismatch = np.max(np.abs(c[idx] - vals)) if vals.size else 0.0
    if mismatch > tol * scale:
        raise AssertionError(f"interpolant discontinuous across cell edges (mismatch {mismatch:.3e})")
    return c


def interpolate_lagrange(f, mesh: TensorMesh, space: LocalSpace,
                         nodes: str = "gauss-lobatto") -> DiscreteField:
    """Lagrange interpolant with equidistant or Gauss-Lobatto nodes."""
    dm = DofMap(mesh, space)
    T = lagrange_to_dofs(space, nodes)
    xi, eta = lagrange_nodes(space, nodes)
    x0, y0, h, k = dm.cell_geometry
    X = x0[:, None] + 0.5 * h[:, None] * (xi + 1.0)
    Y = y0[:, None] + 0.5 * k[:, None] * (eta + 1.0)
    local = _eval(f, X, Y) @ T.T
    return DiscreteField(dm, _scatter_checked(dm, local))


def interpolate(f, mesh: TensorMesh, space: LocalSpace, kind: str = "vec") -> DiscreteField:
    """Dispatch on ``kind`` in {"vec", "gl", "eq"}."""
    if kind == "vec":
        return interpolate_vec(f, mesh, space)
    if kind in ("gl", "gauss-lobatto"):
        return interpolate_lagrange(f, mesh, space, "gauss-lobatto")
    if kind in ("eq", "equidistant"):
        return interpolate_lagrange(f, mesh, space, "equidistant")
    raise ValueError(f"unknown interpolant {kind!r}")


def verify_connection_identity(f, mesh: TensorMesh, p: int, kind: str = "full",
                               per_cell: int = 7) -> float:
    """max |pi_p f - I_p pi_{p+1} f| sampled on a per-cell grid.

    For full spaces the two sides coincide; for Serendipity p >= 4 they do not.
    """
    lo, hi = LocalSpace.make(kind, p), LocalSpace.make(kind, p + 1)
    lhs = interpolate_vec(f, mesh, lo)
    rhs = interpolate_lagrange(interpolate_vec(f, mesh, hi), mesh, lo, "gauss-lobatto")
    _, _, a = lhs.sample_grid(per_cell)
    _, _, b = rhs.sample_grid(per_cell)
    return float(np.max(np.abs(a - b)))
