"""Galerkin, SDFEM and LPS with Q_4 on Bakhvalov-S meshes: energy errors and orders.

Run: python3 demos/convergence_table.py   (about half a minute)
"""
from layerfem.bench import StudyConfig, run_study

for method in ("galerkin", "sdfem", "lps"):
    recs = run_study(StudyConfig(study="convergence", method=method, p=4, N=(8, 16, 32)))
    print(f"\n{method}: sigma = {StudyConfig(method=method, p=4).resolved_sigma()}")
    print(f"{'N':>4} {'energy':>11} {'order':>6}")
    for r in recs:
        order = r.orders.get("energy", (float("nan"),))[0]
        print(f"{r.N:4d} {r.values['energy']:11.3e} {order:6.2f}")

# Supercloseness: the discrete solution is much closer to the interpolant
# than to the exact solution, and a macro-cell recovery turns that into
# a higher order approximation of u itself.
recs = run_study(StudyConfig(study="postprocess", method="sdfem", p=4, N=(8, 16, 32)))
print("\nsdfem postprocessing, ||u - P u_N||_E")
for r in recs:
    print(f"{r.N:4d}  P_vec {r.values['energy:P_vec']:.3e}  P_GL {r.values['energy:P_GL']:.3e}")
