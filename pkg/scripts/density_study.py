"""Projection of low Dirichlet eigenvectors onto nested Poisson ranges."""

import argparse

from dtnrecon.assembly import assemble
from dtnrecon.config import RunConfig, build_coeffs, build_mesh
from dtnrecon.experiments import density_check, unique_continuation_check
from dtnrecon.mesh import select_patch
from dtnrecon.oracle import eigensolve

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--mesh", default="square:32")
ap.add_argument("--coeffs", default="laplace")
ap.add_argument("--count", type=int, default=5)
args = ap.parse_args()

cfg = RunConfig(mesh=args.mesh, coeffs=args.coeffs)
op = assemble(build_mesh(cfg.mesh), build_coeffs(cfg.coeffs)[0])
patch = select_patch(op.mesh, cfg.omega)
pkg = eigensolve(op, count=max(args.count, 20))
rep = density_check(op, patch, cfg.lambda_samples, pkg, args.count)
print("samples  dim  " + "  ".join(f"u{k + 1:<7d}" for k in range(args.count)))
for n, d, row in zip(rep.sample_counts, rep.span_dims, rep.errors):
    print(f"{n:7d} {d:4d}  " + "  ".join(f"{e:.2e}" for e in row))
ucp = unique_continuation_check(op, patch, pkg, 20)
print(f"min Neumann-trace ratio over 20 eigenfunctions: {ucp.min_ratio:.4f}")
