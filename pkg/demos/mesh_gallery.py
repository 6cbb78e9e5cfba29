"""Layer-adapted meshes: where the transition points sit and how fine the layer cells get.

Run: python3 demos/mesh_gallery.py
"""
import math

import numpy as np

from layerfem.mesh import MeshFamily, MeshSpec, build_stype_mesh, check_stype_assumptions

N, eps, sigma = 32, 1e-6, 5.5
print(f"N = {N}, eps = {eps:g}, sigma = {sigma}")
print(f"{'family':>18} {'lambda_x':>10} {'min h':>10} {'max h':>10} {'max|dpsi|':>10}  assumptions")
for label in ("shishkin", "bakhvalov-s", "poly-s:2", "mod-bakhvalov-s"):
    fam = MeshFamily.parse(label)
    m = build_stype_mesh(MeshSpec(N, eps, sigma, 1.0, fam))
    r = check_stype_assumptions(fam, N)
    ok = "".join("+" if v else "-" for v in (r.a1, r.a2, r.a3))
    print(f"{label:>18} {m.lambda_x:10.3e} {m.hx.min():10.3e} {m.hx.max():10.3e} "
          f"{fam.max_abs_psi_prime(N):10.3f}  {ok}")

# The Shishkin layer step carries a ln N factor that Bakhvalov-S avoids
# near the boundary; compare the first steps scaled by eps / N.
sh = build_stype_mesh(MeshSpec(N, eps, sigma, 1.0, MeshFamily("shishkin")))
bs = build_stype_mesh(MeshSpec(N, eps, sigma, 1.0, MeshFamily("bakhvalov-s")))
print("\nfirst four steps / (sigma eps / N):")
print("  shishkin   ", np.round(sh.hx[:4] / (sigma * eps / N), 3))
print("  bakhvalov-s", np.round(bs.hx[:4] / (sigma * eps / N), 3))
print(f"  (2 ln N = {2 * math.log(N):.3f})")
