"""Energy versus balanced norm for bilinear Galerkin and the modified SDFEM.

The energy norm weights the gradient by eps^{1/2}; on characteristic
layers of width eps^{1/2} that hides the layer.  The balanced norm weights
it by eps^{1/4}, so the layer stays visible.

Run: python3 demos/balanced_norm.py
"""
from layerfem.bench import StudyConfig, run_study

for method in ("galerkin", "modsdfem"):
    recs = run_study(StudyConfig(study="convergence", method=method, p=1,
                                 N=(8, 16, 32, 64), mesh="shishkin", sigma=2.5))
    print(f"\n{method} Q_1, Shishkin sigma = 2.5, eps = 1e-6")
    print(f"{'N':>4} {'energy':>10} {'ln-order':>9} {'balanced':>10} {'ln-order':>9}")
    for r in recs:
        oe = r.orders.get("energy", (0, float("nan")))[1]
        ob = r.orders.get("balanced", (0, float("nan")))[1]
        print(f"{r.N:4d} {r.values['energy']:10.3e} {oe:9.2f} {r.values['balanced']:10.3e} {ob:9.2f}")

recs = run_study(StudyConfig(study="eps-uniformity", method="galerkin", p=1, N=(64,),
                             eps=(1e-4, 1e-6, 1e-8)))
print("\nbalanced error at N = 64 is independent of eps:")
for r in recs:
    for k, v in r.values.items():
        if k.startswith("balanced["):
            print(f"  {k:28s} {v:.4e}")
