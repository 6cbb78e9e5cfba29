"""Superconvergent recovery of Q_p solutions on 2x2 macro cells.

Every operator here is a tensor product of a 1-D projection onto P_{p+1}
over a macro interval [x_{2I}, x_{2I+2}], mapped to [-1, 1] with the middle
node mapped to a.  A 1-D operator is described by p + 2 functionals, each
a weighted sum of point values in the two sub-intervals; all point values
are taken at fixed reference points of the fine cells, so the fine field is
evaluated once on a tensor grid.

Each 1-D operator reproduces the endpoint values, hence the 2-D result is
continuous across macro edges.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elements import gauss_legendre_rule, gauss_lobatto_points, legendre_table
from .interpolation import DiscreteField
from .mesh import MacroMesh, build_macro_mesh


def gl_subsample_indices(p: int) -> list[int]:
    """Indices 0, 1, 3, 5, ..., 2p-1, 2p into the 2p+1 ordered Gauss-Lobatto points."""
    return [0] + list(range(1, 2 * p, 2)) + [2 * p]


def _sub_points(p: int):
    """Reference points per fine cell: -1, Gauss nodes (p+1 of them), +1."""
    g = gauss_legendre_rule(p + 1)
    gl = gauss_lobatto_points(p)
    pts = np.unique(np.concatenate([[-1.0, 1.0], g.nodes, gl]))
    return pts, g


def _point_index(pts, t):
    k = int(np.argmin(np.abs(pts - t)))
    if abs(pts[k] - t) > 1e-14:
        raise ValueError("point not in sampling set")
    return k


def _functionals_vec(p: int, a: float, pts, g) -> np.ndarray:
    """Weights (p+2, 2, len(pts)) of the P_vec functionals for interior point a.

    Conditions: for p = 2 values at -1, 1 and the integrals over [-1, a]
    and [a, 1]; for p >= 3 values at -1, a, 1, both split integrals and
    moments against Legendre L_1..L_{p-3} over [-1, 1].  Moments up to L_{p-2} together with
    both split integrals would give p + 3 conditions for the p + 2
    coefficients of P_{p+1}; the highest moment is therefore dropped.
    """
    F = []
    lens = np.array([a + 1.0, 1.0 - a])  # sub-interval lengths in macro coordinates
    starts = np.array([-1.0, a])
    ig = [_point_index(pts, t) for t in g.nodes]

    def point(cell, t):
        w = np.zeros((2, pts.size))
        w[cell, _point_index(pts, t)] = 1.0
        return w

    def moment(q_deg, cells):
        w = np.zeros((2, pts.size))
        for c in cells:
            t = starts[c] + 0.5 * lens[c] * (g.nodes + 1.0)
            q = legendre_table(max(q_deg, 0), t, 0)[0, q_deg] if q_deg > 0 else np.ones_like(t)
            w[c, ig] = 0.5 * lens[c] * g.weights * q
        return w

    if p == 2:
        # the value at a with the whole integral is singular for a = 0
        F += [point(0, -1.0), point(1, 1.0), moment(0, (0,)), moment(0, (1,))]
        top = 0
    else:
        F += [point(0, -1.0), point(1, -1.0), point(1, 1.0), moment(0, (0,)), moment(0, (1,))]
        top = p - 3
    for k in range(1, top + 1):
        F.append(moment(k, (0, 1)))
    return np.stack(F)


def _functionals_gl(p: int, a: float, pts) -> np.ndarray:
    gl = gauss_lobatto_points(p)
    F = []
    for idx in gl_subsample_indices(p):
        w = np.zeros((2, pts.size))
        if idx <= p:
            w[0, _point_index(pts, gl[idx])] = 1.0
        else:
            w[1, _point_index(pts, gl[idx - p])] = 1.0
        F.append(w)
    return np.stack(F)


def _apply_to_basis(F: np.ndarray, a: float, pts, q: int) -> np.ndarray:
    """Matrix A[alpha, m] = functional alpha applied to L_m(t), m = 0..q (macro coordinates)."""
    lens = np.array([a + 1.0, 1.0 - a])
    starts = np.array([-1.0, a])
    A = np.zeros((F.shape[0], q + 1))
    for c in range(2):
        t = starts[c] + 0.5 * lens[c] * (pts + 1.0)
        A += F[:, c, :] @ legendre_table(q, t, 0)[0].T
    return A


@dataclass(eq=False)
class MacroField:
    """Piecewise Q_q field on a macro mesh in Legendre form.

    ``coeffs[I, J, m, n]`` multiplies L_m(t) L_n(s) on macro cell (I, J).
    """

    macro: MacroMesh
    coeffs: np.ndarray

    @property
    def degree(self) -> int:
        return self.coeffs.shape[-1] - 1

    @property
    def cell_geometry(self):
        ii, jj = np.meshgrid(np.arange(self.macro.Nx), np.arange(self.macro.Ny), indexing="ij")
        i, j = ii.ravel(), jj.ravel()
        x, y = self.macro.x, self.macro.y
        return x[i], y[j], np.diff(x)[i], np.diff(y)[j]

    def eval_tensor(self, xi1d, eta1d=None, derivs: int = 1) -> dict:
        eta1d = xi1d if eta1d is None else eta1d
        q = self.degree
        A = legendre_table(q, xi1d, 1)
        B = legendre_table(q, eta1d, 1)
        C = self.coeffs.reshape(-1, q + 1, q + 1)
        _, _, h, k = self.cell_geometry

        def ev(da, db):
            return np.einsum("cmn,mi,nj->cij", C, A[da], B[db]).reshape(C.shape[0], -1)

        out = {"v": ev(0, 0)}
        if derivs >= 1:
            out["x"] = (2.0 / h)[:, None] * ev(1, 0)
            out["y"] = (2.0 / k)[:, None] * ev(0, 1)
        return out

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        x, y = np.broadcast_to(x, shape).ravel(), np.broadcast_to(y, shape).ravel()
        mx, my = self.macro.x, self.macro.y
        I = np.clip(np.searchsorted(mx, x, side="right") - 1, 0, self.macro.Nx - 1)
        J = np.clip(np.searchsorted(my, y, side="right") - 1, 0, self.macro.Ny - 1)
        t = 2.0 * (x - mx[I]) / (mx[I + 1] - mx[I]) - 1.0
        s = 2.0 * (y - my[J]) / (my[J + 1] - my[J]) - 1.0
        q = self.degree
        Lt = legendre_table(q, t, 0)[0]
        Ls = legendre_table(q, s, 0)[0]
        return np.einsum("kmn,mk,nk->k", self.coeffs[I, J], Lt, Ls).reshape(shape)


def _postprocess(field: DiscreteField, macro: MacroMesh | None, build_functionals) -> MacroField:
    mesh = field.mesh
    macro = build_macro_mesh(mesh) if macro is None else macro
    if macro.mesh is not mesh and not (np.array_equal(macro.mesh.x, mesh.x)
                                       and np.array_equal(macro.mesh.y, mesh.y)):
        raise ValueError("macro mesh was built from a different mesh")
    p = field.space.p
    pts, g = _sub_points(p)
    q = p + 1
    # fine field at the tensor sampling points: V[i, j, k, l]
    V = field.eval_tensor(pts, derivs=0)["v"].reshape(mesh.Nx, mesh.Ny, pts.size, pts.size)
    ax, ay = macro.interior_point_x(), macro.interior_point_y()

    def ops(avals):
        Fs, Ainv = [], []
        for a in avals:
            F = build_functionals(p, a, pts, g)
            A = _apply_to_basis(F, a, pts, q)
            if F.shape[0] != q + 1 or np.linalg.cond(A) > 1e12:
                raise np.linalg.LinAlgError("postprocessing conditions not unisolvent")
            Fs.append(F)
            Ainv.append(np.linalg.inv(A))
        return np.stack(Fs), np.stack(Ainv)

    Fx, Ax = ops(ax)
    Fy, Ay = ops(ay)
    # group fine cells into (I, a, J, b) blocks
    Vb = V.reshape(macro.Nx, 2, macro.Ny, 2, pts.size, pts.size)
    G = np.einsum("Iack,Jbdl,IcJdkl->IJab", Fx, Fy, Vb, optimize=True)
    C = np.einsum("Ima,IJab,Jnb->IJmn", Ax, G, Ay, optimize=True)
    return MacroField(macro, C)


def postprocess_vec(field: DiscreteField, macro: MacroMesh | None = None) -> MacroField:
    """P_vec recovery into macro-cell Q_{p+1}; needs p >= 2."""
    if field.space.p < 2:
        raise ValueError("P_vec needs p >= 2; use postprocess_biquadratic for p = 1")
    return _postprocess(field, macro, _functionals_vec)


def postprocess_gl(field: DiscreteField, macro: MacroMesh | None = None) -> MacroField:
    """P_GL: Q_{p+1} interpolation at the subsampled Gauss-Lobatto points."""
    return _postprocess(field, macro, lambda p, a, pts, g: _functionals_gl(p, a, pts))


def postprocess_biquadratic(field: DiscreteField, macro: MacroMesh | None = None) -> MacroField:
    """Biquadratic interpolation of a bilinear field through the 9 macro-cell nodes."""
    if field.space.p != 1:
        raise ValueError("biquadratic postprocessing expects a bilinear field")
    return _postprocess(field, macro, lambda p, a, pts, g: _functionals_gl(1, a, pts))
