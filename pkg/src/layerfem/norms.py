"""Energy, balanced and stabilization norms of errors, plus convergence orders."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .elements import gauss_legendre_rule, quadrature_order
from .fem import ExactSolution, StabilizationPlan, fluctuation_operator
from .interpolation import DofMap


def _evaluate(obj, X, Y, nodes):
    if isinstance(obj, ExactSolution):
        b = lambda fn: np.broadcast_to(np.asarray(fn(X, Y), dtype=float), X.shape)
        return b(obj.u), b(obj.ux), b(obj.uy)
    if hasattr(obj, "eval_tensor"):
        r = obj.eval_tensor(nodes, derivs=1)
        return r["v"], r["x"], r["y"]
    raise TypeError(f"cannot evaluate {type(obj).__name__}")


def _degree(g) -> int:
    return g.space.p if isinstance(g, DofMap) else g.degree


def error_components(exact, field, dofmap=None, n: int | None = None) -> dict:
    """exact - field and its gradient at per-cell Gauss points.

    Either argument may be None (treated as zero).  ``field`` and ``exact``
    may be discrete fields (DiscreteField or postprocessed MacroField); the
    cells integrated over are those of ``field`` (else ``dofmap``, else
    ``exact``).  Two discrete arguments must live on the same cells.
    """
    g = next((o for o in (field, dofmap, exact) if o is not None and hasattr(o, "cell_geometry")),
             None)
    if g is None:
        raise ValueError("need a mesh to integrate on")
    n = quadrature_order(_degree(g)) if n is None else n
    q = gauss_legendre_rule(n)
    x0, y0, h, k = g.cell_geometry
    XI, ETA = np.meshgrid(q.nodes, q.nodes, indexing="ij")
    X = x0[:, None] + 0.5 * h[:, None] * (XI.ravel() + 1.0)
    Y = y0[:, None] + 0.5 * k[:, None] * (ETA.ravel() + 1.0)
    W = 0.25 * (h * k)[:, None] * np.outer(q.weights, q.weights).ravel()
    e = np.zeros_like(X)
    ex = np.zeros_like(X)
    ey = np.zeros_like(X)
    for obj, sign in ((exact, 1.0), (field, -1.0)):
        if obj is None:
            continue
        v, vx, vy = _evaluate(obj, X, Y, q.nodes)
        e += sign * v
        ex += sign * vx
        ey += sign * vy
    return {"e": e, "x": ex, "y": ey, "W": W, "X": X, "Y": Y, "nodes": q.nodes,
            "weights": q.weights, "degree": _degree(g)}


def _sum(W, a) -> float:
    return float(np.sum(W * a))


def energy_error(exact, field, gamma: float, epsilon: float, **kw) -> float:
    """(eps |grad e|^2 + gamma |e|^2)^{1/2} with e = exact - field."""
    c = error_components(exact, field, **kw)
    W = c["W"]
    return math.sqrt(epsilon * _sum(W, c["x"] ** 2 + c["y"] ** 2) + gamma * _sum(W, c["e"] ** 2))


def balanced_error(exact, field, gamma: float, epsilon: float, **kw) -> float:
    """(eps |e_x|^2 + eps^{1/2} |e_y|^2 + gamma |e|^2)^{1/2}."""
    c = error_components(exact, field, **kw)
    W = c["W"]
    return math.sqrt(epsilon * _sum(W, c["x"] ** 2) + math.sqrt(epsilon) * _sum(W, c["y"] ** 2)
                     + gamma * _sum(W, c["e"] ** 2))


def _b_at(b, c):
    return np.broadcast_to(np.asarray(b(c["X"], c["Y"]), dtype=float), c["X"].shape)


def sd_norm_error(exact, field, plan: StabilizationPlan, gamma: float, epsilon: float, b,
                  **kw) -> float:
    """Energy norm plus sum_tau delta_tau |b e_x|^2 (bubble weights supported)."""
    c = error_components(exact, field, **kw)
    W = c["W"]
    xi = np.repeat(c["nodes"], c["nodes"].size)
    d = plan.weight_at(xi)
    energy = epsilon * _sum(W, c["x"] ** 2 + c["y"] ** 2) + gamma * _sum(W, c["e"] ** 2)
    return math.sqrt(energy + _sum(W * d, (_b_at(b, c) * c["x"]) ** 2))


modsd_norm_error = sd_norm_error


def lps_norm_error(exact, field, plan: StabilizationPlan, gamma: float, epsilon: float, b,
                   **kw) -> float:
    """Energy norm plus s(e, e) with fluctuations id - pi onto P_{p-2}."""
    c = error_components(exact, field, **kw)
    W = c["W"]
    K = fluctuation_operator(c["degree"], c["nodes"], c["weights"])
    g = (_b_at(b, c) * c["x"]) @ K.T
    energy = epsilon * _sum(W, c["x"] ** 2 + c["y"] ** 2) + gamma * _sum(W, c["e"] ** 2)
    return math.sqrt(energy + _sum(W * plan.delta[:, None], g**2))


def estimated_orders(errors) -> list[tuple[float, float]]:
    """(order, ln-order) for consecutive pairs of (N, e) with doubling N.

    order = log2(e_N / e_2N); ln-order compares against (N^-1 ln N)^alpha.
    """
    errors = list(errors)
    out = []
    for (N1, e1), (N2, e2) in zip(errors, errors[1:]):
        if e1 <= 0 or e2 <= 0:
            raise ValueError("errors must be positive")
        if N2 != 2 * N1:
            raise ValueError(f"N must double between rows, got {N1} -> {N2}")
        r = math.log(e1 / e2)
        order = r / math.log(2.0)
        ln_order = r / math.log((math.log(N1) / N1) / (math.log(N2) / N2))
        out.append((order, ln_order))
    return out


@dataclass
class ErrorRecord:
    N: int
    dofs: int
    method: str
    space: str
    p: int
    values: dict = field(default_factory=dict)  # norm name -> value
    orders: dict = field(default_factory=dict)  # norm name -> (order, ln_order)
    wall_time: float = 0.0

    def rows(self):
        for norm, value in self.values.items():
            if value < 0:
                raise ValueError("norm values are nonnegative")
            order, ln_order = self.orders.get(norm, (float("nan"), float("nan")))
            yield [self.N, self.dofs, self.method, self.space, self.p, norm,
                   f"{value:.6e}", _fmt(order), _fmt(ln_order)]


def _fmt(v: float) -> str:
    return "" if v is None or not np.isfinite(v) else f"{v:.4f}"


CSV_HEADER = ["N", "dofs", "method", "space", "p", "norm", "value", "order", "ln_order"]


def attach_orders(records: list[ErrorRecord]) -> None:
    """Fill ``orders`` following the table convention (order on the smaller-N row)."""
    norms = {k for r in records for k in r.values}
    for norm in norms:
        rows = [r for r in records if norm in r.values]
        for r, o in zip(rows, estimated_orders([(r.N, r.values[norm]) for r in rows])):
            r.orders[norm] = o


def write_csv(records, path_or_file) -> None:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerows(r.rows())
    finally:
        if own:
            fh.close()
