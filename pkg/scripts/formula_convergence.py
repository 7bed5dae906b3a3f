"""Error of the contour residual formula against the eigenpair oracle as the quadrature is refined."""

import argparse

import numpy as np

from dtnrecon.assembly import assemble
from dtnrecon.config import build_coeffs, build_mesh
from dtnrecon.mesh import select_patch
from dtnrecon.oracle import eigensolve
from dtnrecon.residual import verify_residual_formula

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--mesh", default="square:32")
ap.add_argument("--coeffs", default="laplace")
ap.add_argument("--poles", type=int, default=3)
ap.add_argument("--n-quad", type=int, nargs="+", default=[8, 16, 32, 64])
args = ap.parse_args()

op = assemble(build_mesh(args.mesh), build_coeffs(args.coeffs)[0])
patch = select_patch(op.mesh, (1,))
pkg = eigensolve(op, count=4 * args.poles)
phi = np.random.default_rng(0).standard_normal(len(patch))
print("pole".rjust(12) + "".join(f"{n:>10d}" for n in args.n_quad))
for lam in pkg.cluster_values()[:args.poles]:
    errs = [verify_residual_formula(op, patch, lam, 2j, 3j, phi, pkg, n) for n in args.n_quad]
    print(f"{lam:12.6f}" + "".join(f"{e:10.1e}" for e in errs))
