"""Study drivers: mesh, solve and measure over N (or eps) and collect error records."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .elements import LocalSpace
from .fd import (FD_SIGMA, AdaptConfig, FDGrid, adapt_loop, compute_indicators, fd_solve,
                 linf_error)
from .fem import METHODS, NumericalFailure, Problem, solve_problem
from .interpolation import DofMap, interpolate
from .mesh import MeshFamily, MeshSpec, build_stype_mesh
from .norms import (ErrorRecord, attach_orders, balanced_error, energy_error, lps_norm_error,
                    sd_norm_error)
from .postprocess import postprocess_biquadratic, postprocess_gl, postprocess_vec
from .problems import problem_example1, problem_example2

__all__ = ["STUDIES", "StudyConfig", "run_study", "problem_example1", "problem_example2"]

STUDIES = ("convergence", "supercloseness", "postprocess", "balanced", "eps-uniformity",
           "fd-indicator", "adapt")
FD_METHOD = "fd-upwind"
DEFAULT_N = (8, 16, 32, 64)
EXTENDED_N = (128, 256, 320)
DEFAULT_EPS_SWEEP = tuple(10.0**-k for k in range(1, 9))

# Transition factor under which the LPS weights reproduce the reference
# errors for p = 4 and p = 5 (p + 3/2 does not).
LPS_SIGMA = 6.0


@dataclass
class StudyConfig:
    """One study: which discretization, which meshes, which errors.

    ``sigma=None`` and ``mesh=None`` pick the per-study defaults: Bakhvalov-S
    with sigma = p + 3/2 for higher-order FEM (6 for LPS), Shishkin with
    sigma = 5/2 for the bilinear balanced-norm studies and Shishkin with
    ``FD_SIGMA`` for finite differences.  ``clamp`` applies the coercivity
    cap to SDFEM weights; the reference tables are reproduced without it.
    """

    study: str = "convergence"
    method: str = "galerkin"
    space: str = "full"
    p: int = 4
    N: tuple = DEFAULT_N
    eps: float | tuple = 1e-6
    mesh: str | None = None
    sigma: float | None = None
    interp: str = "vec"
    C_SD: float = 1.0
    C_LPS: float = 0.001
    sd_set: int = 2
    clamp: bool = False
    extended: bool = False
    adapt: AdaptConfig = field(default_factory=AdaptConfig)

    @property
    def is_fd(self) -> bool:
        return self.method == FD_METHOD or self.study in ("fd-indicator", "adapt")

    @property
    def chapter4(self) -> bool:
        return self.study in ("balanced", "eps-uniformity")

    def resolved_mesh(self) -> MeshFamily:
        if self.mesh is not None:
            return MeshFamily.parse(self.mesh)
        return MeshFamily("shishkin" if self.is_fd or self.chapter4 else "bakhvalov-s")

    def resolved_sigma(self) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        if self.is_fd:
            return FD_SIGMA
        if self.chapter4:
            return 2.5
        if self.method == "lps":
            return LPS_SIGMA
        return self.p + 1.5

    def n_list(self) -> tuple:
        return tuple(self.N) + (EXTENDED_N if self.extended else ())

    def eps_list(self) -> tuple:
        if isinstance(self.eps, (int, float)):
            return (float(self.eps),)
        return tuple(float(e) for e in self.eps)

    def validate(self) -> "StudyConfig":
        if self.study not in STUDIES:
            raise ValueError(f"unknown study {self.study!r}; expected one of {STUDIES}")
        if self.method not in METHODS + (FD_METHOD,):
            raise ValueError(f"unknown method {self.method!r}")
        if self.study in ("fd-indicator", "adapt") and self.method != FD_METHOD:
            raise ValueError(f"study {self.study!r} needs method {FD_METHOD!r}")
        if self.is_fd and self.study not in ("convergence", "fd-indicator", "adapt"):
            raise ValueError(f"study {self.study!r} is not defined for finite differences")
        if self.space not in ("full", "serendipity"):
            raise ValueError(f"unknown space {self.space!r}")
        if self.interp not in ("vec", "gl", "eq"):
            raise ValueError(f"unknown interpolant {self.interp!r}")
        if not self.is_fd:
            LocalSpace.make(self.space, self.p)
        if self.chapter4 and self.p != 1:
            raise ValueError("balanced-norm studies use bilinear elements (p = 1)")
        if not self.n_list() or any(int(n) < 4 for n in self.n_list()):
            raise ValueError("N values must be >= 4")
        if any(not 0.0 < e <= 1.0 for e in self.eps_list()):
            raise ValueError("eps must lie in (0, 1]")
        self.resolved_mesh()
        if self.resolved_sigma() <= 0:
            raise ValueError("sigma must be positive")
        self.adapt.validate()
        return self


def _problem(cfg: StudyConfig, eps: float) -> Problem:
    return problem_example2(eps) if cfg.is_fd else problem_example1(eps)


def _fem_point(cfg: StudyConfig, N: int, eps: float, tag: str = "") -> ErrorRecord:
    pr = _problem(cfg, eps)
    space = LocalSpace.make(cfg.space, cfg.p)
    mesh = build_stype_mesh(MeshSpec(N, eps, cfg.resolved_sigma(), pr.beta, cfg.resolved_mesh()))
    t0 = time.perf_counter()
    u, plan = solve_problem(pr, mesh, space, cfg.method, C_SD=cfg.C_SD, C_LPS=cfg.C_LPS,
                            sd_set=cfg.sd_set, clamp=cfg.clamp)
    ex, g = pr.exact, pr.gamma
    vals = {}

    def both(label, a, b):
        vals["energy" + label] = energy_error(a, b, g, eps)
        vals["balanced" + label] = balanced_error(a, b, g, eps)

    if cfg.study in ("convergence", "eps-uniformity", "balanced"):
        both("", ex, u)
        if cfg.method in ("sdfem", "modsdfem"):
            vals["sd"] = sd_norm_error(ex, u, plan, g, eps, pr.b)
        elif cfg.method == "lps":
            vals["lps"] = lps_norm_error(ex, u, plan, g, eps, pr.b)
    if cfg.study in ("supercloseness", "balanced"):
        kind = "gl" if cfg.p == 1 else cfg.interp
        both(":" + kind, interpolate(ex.u, mesh, space, kind), u)
    if cfg.study in ("postprocess", "balanced"):
        if cfg.p == 1:
            both(":P_biquad", ex, postprocess_biquadratic(u))
        else:
            both(":P_vec", ex, postprocess_vec(u))
            both(":P_GL", ex, postprocess_gl(u))
    if tag:
        vals = {f"{k}{tag}": v for k, v in vals.items()}
    dofs = int(DofMap(mesh, space).interior_dofs.size)
    return ErrorRecord(N, dofs, cfg.method, cfg.space, cfg.p, vals, {},
                       time.perf_counter() - t0)


def _fd_point(cfg: StudyConfig, N: int, eps: float, tag: str = "") -> ErrorRecord:
    pr = _problem(cfg, eps)
    t0 = time.perf_counter()
    grid = FDGrid.stype(N, eps, cfg.resolved_sigma(), cfg.resolved_mesh(), pr.beta)
    u = fd_solve(pr, grid, eps)
    rep = compute_indicators(u, eps)
    vals = {"linf": linf_error(u, pr.exact), "eta": rep.eta, "eta_tilde": rep.eta_tilde}
    if tag:
        vals = {f"{k}{tag}": v for k, v in vals.items()}
    return ErrorRecord(N, grid.dofs, FD_METHOD, "-", 1, vals, {}, time.perf_counter() - t0)


def _eps_tag(eps: float) -> str:
    return f"[eps={eps:.1e}]"


def run_study(config: StudyConfig) -> list[ErrorRecord]:
    """Run ``config`` and return one record per N (or per eps for sweeps).

    Orders are attached for N sweeps with doubling N; eps sweeps carry the
    eps value in the norm label, e.g. ``balanced[eps=1.0e-06]``.
    """
    cfg = config.validate()
    point = _fd_point if cfg.is_fd else _fem_point
    try:
        if cfg.study == "adapt":
            return _adapt_records(cfg)
        if cfg.study in ("eps-uniformity", "fd-indicator"):
            N = cfg.n_list()[0]
            eps_values = cfg.eps_list() if len(cfg.eps_list()) > 1 else DEFAULT_EPS_SWEEP
            return [point(cfg, N, e, _eps_tag(e)) for e in eps_values]
        eps = cfg.eps_list()[0]
        records = [point(cfg, int(N), eps) for N in cfg.n_list()]
    except (ValueError, NumericalFailure, np.linalg.LinAlgError) as exc:
        raise type(exc)(f"{exc} [study {cfg.study}, {cfg.method}, {cfg.space}, p={cfg.p}]") from exc
    # orders need consecutive doublings; the extended tail (256 -> 320) breaks that
    stop = next((i for i in range(1, len(records)) if records[i].N != 2 * records[i - 1].N),
                len(records))
    attach_orders(records[:stop])
    return records


def _adapt_records(cfg: StudyConfig) -> list[ErrorRecord]:
    eps = cfg.eps_list()[0]
    ac = replace(cfg.adapt, sigma=cfg.resolved_sigma())
    steps = adapt_loop(_problem(cfg, eps), ac, eps)
    return [ErrorRecord(s.grid.N, s.dofs, FD_METHOD, f"{s.grid.N}x{s.grid.M}", 1,
                        {"linf": s.true_error, "eta": s.eta, "eta_tilde": s.eta_tilde})
            for s in steps]


def dof_order(dofs, errors, min_dofs: float = 0.0) -> float:
    """Least-squares slope of ln(error) against ln(dofs) over points with dofs >= min_dofs."""
    d = np.asarray(dofs, dtype=float)
    e = np.asarray(errors, dtype=float)
    m = d >= min_dofs
    if m.sum() < 2:
        raise ValueError("need at least two points for a slope")
    return float(np.polyfit(np.log(d[m]), np.log(e[m]), 1)[0])


def energy_norm_of_exact(eps: float = 1e-6, N: int = 64, p: int = 4) -> float:
    """||u||_E of example 1 by Gauss quadrature on a Bakhvalov-S mesh."""
    pr = problem_example1(eps)
    mesh = build_stype_mesh(MeshSpec(N, eps, p + 1.5, pr.beta, MeshFamily("bakhvalov-s")))
    return energy_error(pr.exact, None, pr.gamma, eps, dofmap=DofMap(mesh, LocalSpace.full(p)))
