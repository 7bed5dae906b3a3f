"""Pole scan of the partial DtN map compared with the Dirichlet eigenvalue oracle."""

import argparse
import time

from dtnrecon.assembly import assemble
from dtnrecon.config import RunConfig, build_coeffs, build_mesh
from dtnrecon.mesh import select_patch
from dtnrecon.oracle import eigensolve
from dtnrecon.residual import pole_scan

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--mesh", default="square:32")
ap.add_argument("--coeffs", default="laplace")
ap.add_argument("--omega", type=int, nargs="+", default=[1])
ap.add_argument("--interval", type=float, nargs=2, default=(10.0, 60.0))
ap.add_argument("--n-quad", type=int, default=64)
args = ap.parse_args()

cfg = RunConfig(mesh=args.mesh, coeffs=args.coeffs, omega=tuple(args.omega))
op = assemble(build_mesh(cfg.mesh), build_coeffs(cfg.coeffs)[0], cfg.quad_order)
patch = select_patch(op.mesh, cfg.omega)
t = time.perf_counter()
scan = pole_scan(op, patch, tuple(args.interval), n_quad=args.n_quad)
elapsed = time.perf_counter() - t
oracle = eigensolve(op, interval=tuple(args.interval))

print(f"{'pole':>14} {'mult':>4} {'oracle':>14} {'mult':>4} {'rel err':>9}")
for (lam, m), cl in zip(scan, oracle.clusters):
    ref = oracle.eigenvalues[cl[0]]
    print(f"{lam:14.8f} {m:4d} {ref:14.8f} {len(cl):4d} {abs(lam - ref) / ref:9.1e}")
if len(scan) != len(oracle.clusters):
    print(f"cluster count mismatch: {len(scan)} poles, {len(oracle.clusters)} oracle clusters")
for w in scan.warnings:
    print("warning:", w)
print(f"scan time {elapsed:.1f}s")
