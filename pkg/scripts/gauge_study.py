"""DtN and spectral discrepancy of a gauge pair under mesh refinement, for several gauge amplitudes."""

import argparse

from dtnrecon.coefficients import laplace
from dtnrecon.config import build_mesh
from dtnrecon.experiments import uniqueness_experiment

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--mesh", default="square:16")
ap.add_argument("--eps", type=float, nargs="+", default=[0.0, 0.02, 0.05, 0.1])
ap.add_argument("--refinements", type=int, default=2)
args = ap.parse_args()

mesh = build_mesh(args.mesh)
lams = (0.0, 2j, -2j)
for eps in args.eps:
    rep = uniqueness_experiment(mesh, laplace(), eps, lams, (1,), refinements=args.refinements)
    print(f"eps = {eps}")
    for lv in rep.levels:
        dtn = "  ".join(f"{lv.dtn_discrepancy[complex(v)]:.2e}" for v in lams)
        print(f"  h = {lv.h:.4f}  DtN {dtn}  eig {lv.eig_discrepancy:.2e}")
    ratios = "  ".join(f"{rep.dtn_ratios[complex(v)]:.2f}" for v in lams)
    print(f"  coarse/fine ratios: DtN {ratios}  eig {rep.eig_ratio:.2f}")
