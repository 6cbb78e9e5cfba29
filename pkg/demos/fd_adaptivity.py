"""Anisotropic adaptive refinement for the upwind scheme, driven by the indicators.

Starting from a uniform 4x4 grid, each step refines either x or y intervals
where the modified indicator terms are large.  The final grids resolve both
the exponential and the characteristic layers without knowing eps.

Run: python3 demos/fd_adaptivity.py   (about ten seconds)
"""
from layerfem.fd import AdaptConfig, FDGrid, adapt_loop, fd_solve, linf_error
from layerfem.problems import problem_example2

eps = 1e-6
pr = problem_example2(eps)
steps = adapt_loop(pr, AdaptConfig(alpha=0.9, max_dofs=64 * 64), eps)
print(f"{'iter':>4} {'grid':>9} {'dofs':>6} {'error':>10} {'eta~':>10} dir")
for s in steps:
    print(f"{s.iter:4d} {s.grid.N:4d}x{s.grid.M:<4d} {s.dofs:6d} {s.true_error:10.3e} "
          f"{s.eta_tilde:10.3e} {s.direction}")

last = steps[-1]
print(f"\nsmallest x step {last.grid.h.min():.2e}, smallest y step {last.grid.k.min():.2e}")
ref = linf_error(fd_solve(pr, FDGrid.stype(64, eps), eps), pr.exact)
print(f"final adaptive grid: {last.dofs} dofs, error {last.true_error:.3e}")
print(f"Shishkin 64x64 ({64 * 64} dofs), built with eps known: error {ref:.3e}")
