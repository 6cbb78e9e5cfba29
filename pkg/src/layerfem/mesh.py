"""Layer-adapted S-type tensor meshes on the unit square.

The x-direction is refined towards the outflow boundary x = 0 (exponential
layer), the y-direction towards y = 0 and y = 1 (characteristic layers).
Every mesh family is described by its mesh-generating function ``phi`` on
[0, 1/2] with ``phi(0) = 0`` and ``phi(1/2) = ln N``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class Region(enum.IntEnum):
    OMEGA11 = 0
    OMEGA12 = 1
    OMEGA21 = 2
    OMEGA22 = 3


@dataclass(frozen=True)
class MeshFamily:
    """Mesh-generating function of an S-type mesh.

    ``kind`` is one of ``"shishkin"``, ``"bakhvalov-s"``, ``"poly-s"`` and
    ``"mod-bakhvalov-s"``; ``m`` is the grading exponent of the polynomial
    S-mesh and ignored otherwise.
    """

    kind: str
    m: float = 1.0

    KINDS = ("shishkin", "bakhvalov-s", "poly-s", "mod-bakhvalov-s")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown mesh family {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "poly-s" and not self.m > 0:
            raise ValueError("polynomial S-mesh needs m > 0")

    @classmethod
    def parse(cls, text: str) -> "MeshFamily":
        """Parse ``shishkin``, ``bakhvalov-s``, ``mod-bakhvalov-s`` or ``poly-s:<m>``."""
        text = text.strip().lower()
        if text.startswith("poly-s"):
            _, _, m = text.partition(":")
            return cls("poly-s", float(m) if m else 1.0)
        return cls(text)

    @property
    def label(self) -> str:
        return f"poly-s:{self.m:g}" if self.kind == "poly-s" else self.kind

    def q(self, N: int) -> float:
        """Pole location of the modified Bakhvalov S-mesh."""
        return 0.5 * (1.0 + 1.0 / math.log(N))

    def phi(self, t, N: int):
        t = np.asarray(t, dtype=float)
        lnN = math.log(N)
        if self.kind == "shishkin":
            return 2.0 * t * lnN
        if self.kind == "bakhvalov-s":
            return -np.log1p(-2.0 * t * (1.0 - 1.0 / N))
        if self.kind == "poly-s":
            return (2.0 * t) ** self.m * lnN
        q = self.q(N)
        return t / (q - t)

    def dphi(self, t, N: int):
        t = np.asarray(t, dtype=float)
        lnN = math.log(N)
        if self.kind == "shishkin":
            return np.full_like(t, 2.0 * lnN)
        if self.kind == "bakhvalov-s":
            a = 2.0 * (1.0 - 1.0 / N)
            return a / (1.0 - a * t)
        if self.kind == "poly-s":
            return 2.0 * self.m * (2.0 * t) ** (self.m - 1.0) * lnN
        q = self.q(N)
        return q / (q - t) ** 2

    def psi(self, t, N: int):
        return np.exp(-self.phi(t, N))

    def dpsi(self, t, N: int):
        return -self.dphi(t, N) * self.psi(t, N)

    def max_abs_psi_prime(self, N: int) -> float:
        """max |psi'| over [0, 1/2] as tabulated for the family.

        Shishkin: 2 ln N, Bakhvalov-S: 2, modified Bakhvalov-S: 3/(2q).
        The polynomial S-mesh has no closed form; its value is sampled.
        """
        if self.kind == "shishkin":
            return 2.0 * math.log(N)
        if self.kind == "bakhvalov-s":
            return 2.0
        if self.kind == "mod-bakhvalov-s":
            return 3.0 / (2.0 * self.q(N))
        return self.max_abs_psi_prime_sampled(N)

    def max_abs_psi_prime_sampled(self, N: int, samples: int = 20001) -> float:
        t = np.linspace(0.0, 0.5, samples)
        return float(np.max(np.abs(self.dpsi(t, N))))


@dataclass(frozen=True)
class MeshSpec:
    N: int
    epsilon: float
    sigma: float
    beta: float = 1.0
    family: MeshFamily = field(default_factory=lambda: MeshFamily("shishkin"))

    def validate(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 4 or self.N % 4:
            raise ValueError(f"N must be a positive multiple of 4, got {self.N!r}")
        if not self.epsilon > 0 or self.epsilon > 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon!r}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta!r}")


@dataclass(frozen=True, eq=False)
class TensorMesh:
    """Tensor-product mesh with nodes ``x`` (N+1) and ``y`` (M+1).

    S-type meshes also carry their transition points and the spec they were
    built from; generic tensor meshes (e.g. uniform test meshes) leave them
    unset.
    """

    x: np.ndarray
    y: np.ndarray
    lambda_x: float = float("nan")
    lambda_y: float = float("nan")
    capped_x: bool = False
    capped_y: bool = False
    spec: MeshSpec | None = None

    def __post_init__(self):
        for name in ("x", "y"):
            a = np.array(getattr(self, name), dtype=float)
            if a.ndim != 1 or a.size < 2 or np.any(np.diff(a) <= 0):
                raise ValueError(f"{name} nodes must be strictly increasing")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def Nx(self) -> int:
        return self.x.size - 1

    @property
    def Ny(self) -> int:
        return self.y.size - 1

    @property
    def N(self) -> int:
        return self.Nx

    @property
    def hx(self) -> np.ndarray:
        return np.diff(self.x)

    @property
    def ky(self) -> np.ndarray:
        return np.diff(self.y)

    @property
    def capped(self) -> tuple[bool, bool]:
        return self.capped_x, self.capped_y

    def region_tags(self) -> np.ndarray:
        """Region of every cell, shape (Nx, Ny), decided by the cell midpoint."""
        xm = 0.5 * (self.x[1:] + self.x[:-1])
        ym = 0.5 * (self.y[1:] + self.y[:-1])
        in_x_layer = (xm < self.lambda_x)[:, None]
        in_y_layer = ((ym < self.lambda_y) | (ym > 1.0 - self.lambda_y))[None, :]
        tags = np.empty((self.Nx, self.Ny), dtype=np.int8)
        tags[...] = Region.OMEGA11
        tags[np.broadcast_to(in_x_layer & ~in_y_layer, tags.shape)] = Region.OMEGA12
        tags[np.broadcast_to(~in_x_layer & in_y_layer, tags.shape)] = Region.OMEGA21
        tags[np.broadcast_to(in_x_layer & in_y_layer, tags.shape)] = Region.OMEGA22
        return tags

    def satisfies_hk_assumption(self) -> bool:
        """Whether h <= k <= N^-1 max|psi'| holds for the layer mesh widths.

        Only reported, never enforced.
        """
        if self.spec is None:
            raise ValueError("hk assumption needs an S-type mesh")
        N = self.N
        h = self.hx[: N // 2].max()
        k = self.ky[: N // 4].max()
        return bool(h <= k <= self.spec.family.max_abs_psi_prime(N) / N)


def uniform_mesh(nx: int, ny: int | None = None) -> TensorMesh:
    ny = nx if ny is None else ny
    return TensorMesh(np.linspace(0.0, 1.0, nx + 1), np.linspace(0.0, 1.0, ny + 1))


def build_stype_mesh(spec: MeshSpec) -> TensorMesh:
    """Build the S-type mesh for ``spec``.

    When a transition point hits its cap (1/2 in x, 1/4 in y) the layer
    part is rescaled so that the transition node still sits at the capped
    value, and the corresponding ``capped`` flag is set.
    """
    spec.validate()
    N, fam = spec.N, spec.family
    lnN = math.log(N)

    lam_x = spec.sigma * spec.epsilon / spec.beta * lnN
    lam_y = spec.sigma * math.sqrt(spec.epsilon) * lnN
    capped_x, capped_y = lam_x >= 0.5, lam_y >= 0.25
    lam_x, lam_y = min(lam_x, 0.5), min(lam_y, 0.25)
    # x_i = (lambda/ln N) phi(i/N) reduces to sigma*eps/beta*phi when uncapped
    sx, sy = lam_x / lnN, lam_y / lnN

    i = np.arange(N + 1)
    x = np.empty(N + 1)
    x[: N // 2 + 1] = sx * fam.phi(i[: N // 2 + 1] / N, N)
    x[N // 2:] = 1.0 - 2.0 * (1.0 - lam_x) * (1.0 - i[N // 2:] / N)
    x[N // 2] = lam_x
    x[0], x[N] = 0.0, 1.0

    j = np.arange(N + 1)
    y = np.empty(N + 1)
    lo, hi = N // 4, 3 * N // 4
    y[: lo + 1] = sy * fam.phi(2.0 * j[: lo + 1] / N, N)
    y[lo: hi + 1] = 0.5 + (1.0 - 2.0 * lam_y) * (2.0 * j[lo: hi + 1] / N - 1.0)
    y[hi:] = 1.0 - sy * fam.phi(2.0 - 2.0 * j[hi:] / N, N)
    y[lo], y[hi] = lam_y, 1.0 - lam_y
    y[0], y[N] = 0.0, 1.0

    return TensorMesh(x, y, lam_x, lam_y, capped_x, capped_y, spec)


@dataclass(frozen=True)
class StypeReport:
    a1: bool
    a2: bool
    a3: bool
    max_dphi: float
    min_increment: float
    max_abs_psi_prime: float
    C: float
    sweep: tuple[int, ...]


def check_stype_assumptions(family: MeshFamily, N: int, C: float = 10.0,
                            doublings: int = 10, samples: int = 20001) -> StypeReport:
    """Numerical diagnostic of the three S-type mesh assumptions.

    The assumptions are uniform in N, so each normalised quantity is checked
    over the sweep N, 2N, ..., 2^doublings N:

    * a1: max phi' / N <= C
    * a2: N * min_i (phi((i+1)/N) - phi(i/N)) >= 1/C
    * a3: max|psi'| / sqrt(N / ln N) <= C

    The returned maxima/minima are those observed at the given N.
    """
    if N < 4:
        raise ValueError("N must be at least 4")
    t = np.linspace(0.0, 0.5, samples)
    sweep = tuple(N * 2**k for k in range(doublings + 1))
    a1 = a2 = a3 = True
    observed = None
    for n in sweep:
        max_dphi = float(np.max(family.dphi(t, n)))
        ti = np.arange(n // 2 + 1) / n
        min_inc = float(np.min(np.diff(family.phi(ti, n))))
        mpsi = family.max_abs_psi_prime_sampled(n, samples)
        a1 &= max_dphi / n <= C
        a2 &= n * min_inc >= 1.0 / C
        a3 &= mpsi / math.sqrt(n / math.log(n)) <= C
        if observed is None:
            observed = (max_dphi, min_inc, mpsi)
    return StypeReport(bool(a1), bool(a2), bool(a3), *observed, C=C, sweep=sweep)


@dataclass(frozen=True, eq=False)
class MacroMesh:
    """2x2 agglomeration of a TensorMesh.

    Macro cell (I, J) owns the fine cells (2I + a, 2J + b) for a, b in {0, 1}.
    """

    mesh: TensorMesh
    x: np.ndarray
    y: np.ndarray

    @property
    def Nx(self) -> int:
        return self.x.size - 1

    @property
    def Ny(self) -> int:
        return self.y.size - 1

    def children(self, I: int, J: int) -> list[tuple[int, int]]:
        return [(2 * I + a, 2 * J + b) for b in (0, 1) for a in (0, 1)]

    def parent_map(self) -> np.ndarray:
        """Macro index (I, J) of every fine cell, shape (Nx, Ny, 2)."""
        ii, jj = np.meshgrid(np.arange(self.mesh.Nx) // 2, np.arange(self.mesh.Ny) // 2,
                             indexing="ij")
        return np.stack([ii, jj], axis=-1)

    def interior_point_x(self) -> np.ndarray:
        """Reference coordinate in (-1, 1) of the middle fine node of each macro column."""
        x = self.mesh.x
        return 2.0 * (x[1:-1:2] - x[:-2:2]) / (x[2::2] - x[:-2:2]) - 1.0

    def interior_point_y(self) -> np.ndarray:
        y = self.mesh.y
        return 2.0 * (y[1:-1:2] - y[:-2:2]) / (y[2::2] - y[:-2:2]) - 1.0


def build_macro_mesh(mesh: TensorMesh) -> MacroMesh:
    if mesh.Nx % 8 or mesh.Ny % 8:
        raise ValueError(
            f"macro mesh needs the cell count divisible by 8 in both directions, got "
            f"{mesh.Nx}x{mesh.Ny}; transition lines would be crossed otherwise")
    return MacroMesh(mesh, mesh.x[::2].copy(), mesh.y[::2].copy())


def dump_mesh(mesh: TensorMesh, path) -> None:
    """Write the plain-text mesh dump (header, x block, y block)."""
    spec = mesh.spec
    fam = spec.family.label if spec else "tensor"
    N = mesh.Nx
    eps = spec.epsilon if spec else float("nan")
    sigma = spec.sigma if spec else float("nan")
    lines = [f"# stype {fam} N={N} eps={eps:.17g} sigma={sigma:.17g} "
             f"lambda_x={mesh.lambda_x:.17g} lambda_y={mesh.lambda_y:.17g}", "# x"]
    lines += [f"{i} {v:.17g}" for i, v in enumerate(mesh.x)]
    lines += ["", "", "# y"]
    lines += [f"{j} {v:.17g}" for j, v in enumerate(mesh.y)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh_dump(path) -> tuple[dict, np.ndarray, np.ndarray]:
    """Read a mesh dump back into (header fields, x nodes, y nodes)."""
    header: dict = {}
    blocks: dict[str, list[float]] = {"x": [], "y": []}
    current = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# stype"):
                parts = line[2:].split()
                header["family"] = parts[1]
                for kv in parts[2:]:
                    k, v = kv.split("=")
                    header[k] = int(v) if k == "N" else float(v)
            elif line in ("# x", "# y"):
                current = line[-1]
            elif line and current:
                blocks[current].append(float(line.split()[1]))
    return header, np.array(blocks["x"]), np.array(blocks["y"])
