"""Command line entry point.

Every subcommand reads the same JSON config (``--config``) with flags taking
precedence, writes a JSON document to ``--out`` (plus a CSV next to it where
tabular output makes sense) and prints a one-line summary.  Without ``--out``
the JSON goes to stdout.  Exit codes: 0 success, 2 invalid input, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import config as cfg
from .assembly import assemble
from .errors import DtnError, NumericalError, ValidationError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
IDENTITY_TOL = 1e-9


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _cplx(z):
    z = complex(z)
    return [z.real, z.imag]


def _floats(a):
    return [float(v) for v in np.asarray(a).ravel()]


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def dump_json(doc):
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False, default=_jsonable) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# -- context ----------------------------------------------------------------------------


class Context:
    def __init__(self, args):
        conf = cfg.load_config(args.config) if getattr(args, "config", None) else cfg.RunConfig()
        tol = conf.tolerances
        tol = cfg.Tolerances(
            args.cluster_tol if args.cluster_tol is not None else tol.cluster_tol,
            args.rank_tol if args.rank_tol is not None else tol.rank_tol,
            args.pole_loc_tol if args.pole_loc_tol is not None else tol.pole_loc_tol)
        contour = cfg.ContourConfig(args.n_quad) if args.n_quad is not None else conf.contour
        omega = cfg.parse_omega(args.omega) if args.omega else conf.omega
        self.conf = conf.override(mesh=args.mesh, coeffs=args.coeffs, omega=omega,
                                  tolerances=tol, contour=contour, quad_order=args.quad_order)
        if args.n_quad is not None and (args.n_quad < 2 or args.n_quad & (args.n_quad - 1)):
            raise ValidationError(f"--n-quad must be a power of two, got {args.n_quad}")
        self.threads = max(1, int(args.threads))
        self._mesh = self._op = None
        self._coeffs = None

    @property
    def mesh(self):
        if self._mesh is None:
            self._mesh = cfg.build_mesh(self.conf.mesh)
        return self._mesh

    @property
    def coeffs(self):
        if self._coeffs is None:
            self._coeffs = cfg.build_coeffs(self.conf.coeffs)
        return self._coeffs

    @property
    def op(self):
        if self._op is None:
            self._op = assemble(self.mesh, self.coeffs[0], self.conf.quad_order)
        return self._op

    def patch(self):
        from .mesh import select_patch
        return select_patch(self.mesh, self.conf.omega)

    def meta(self):
        t = self.conf.tolerances
        mesh = self.conf.mesh
        return {
            "mesh_file": mesh if isinstance(mesh, str) else json.dumps(mesh, sort_keys=True),
            "coeff_id": self.coeffs[1],
            "omega_labels": list(self.conf.omega),
            "n_quad": self.conf.contour.n_quad,
            "tolerances": {"cluster_tol": t.cluster_tol, "rank_tol": t.rank_tol, "pole_loc_tol": t.pole_loc_tol},
            "mode": "serial" if self.threads == 1 else f"parallel({self.threads})",
        }


# -- subcommands ------------------------------------------------------------------------


def cmd_mesh(ctx, args):
    from .mesh import generate_lshape, generate_unit_square, refine_uniform, validate, write_mesh

    if args.generate:
        gen = {"square": generate_unit_square, "lshape": generate_lshape}[args.generate]
        mesh = gen(args.n)
    else:
        mesh = ctx.mesh
    for _ in range(args.refine):
        mesh = refine_uniform(mesh)
    validate(mesh)
    doc = {"n_nodes": mesh.n_nodes, "n_triangles": mesh.n_triangles}
    text = write_mesh(mesh)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        return None, f"mesh: {doc['n_nodes']} nodes, {doc['n_triangles']} triangles -> {args.out}", None
    sys.stdout.write(text)
    return None, None, None


def cmd_assemble_info(ctx, args):
    from .coefficients import check_ellipticity
    from .oracle import spectrum_lower_bound

    op = ctx.op
    asym = abs(op.K - op.K.conj().T).max()
    doc = {"n_nodes": op.n, "n_interior": len(op.idx_interior), "n_boundary": len(op.idx_boundary),
           "nnz_K": int(op.K.nnz), "nnz_B": int(op.B.nnz), "is_real": bool(op.is_real),
           "hermitian_defect": float(asym), "ellipticity_estimate": check_ellipticity(ctx.coeffs[0], ctx.mesh),
           "spectrum_lower_bound": spectrum_lower_bound(op), "h": ctx.mesh.h(), "meta": ctx.meta()}
    return doc, f"assembled {op.n} nodes ({len(op.idx_interior)} interior), nnz(K)={op.K.nnz}", None


def cmd_eig(ctx, args):
    from .oracle import eigensolve

    if (args.count is None) == (args.interval is None):
        raise ValidationError("eig needs exactly one of --count or --interval")
    pkg = eigensolve(ctx.op, count=args.count, interval=args.interval, cluster_tol=ctx.conf.tolerances.cluster_tol)
    vals = pkg.cluster_values()
    doc = {"eigenvalues": _floats(pkg.eigenvalues),
           "clusters": [{"lambda": float(v), "multiplicity": len(c), "indices": list(c)} for v, c in zip(vals, pkg.clusters)],
           "meta": ctx.meta()}
    rows = [("index", "lambda", "cluster")] + [
        (j, float(pkg.eigenvalues[j]), k) for k, c in enumerate(pkg.clusters) for j in c]
    first = f"lambda_1 = {pkg.eigenvalues[0]:.10g}" if len(pkg.eigenvalues) else "empty"
    return doc, f"eig: {len(pkg.eigenvalues)} eigenvalues in {len(pkg.clusters)} clusters, {first}", rows


def cmd_dtn(ctx, args):
    from .dtn import dtn_matrix

    lam = complex(args.lam[0], args.lam[1])
    D = dtn_matrix(ctx.op, lam, ctx.patch())
    doc = {"lambda": _cplx(lam), "basis_nodes": [int(v) for v in D.basis.nodes],
           "matrix": [[_cplx(v) for v in row] for row in D.N], "meta": ctx.meta()}
    return doc, f"dtn: {len(D.basis)}x{len(D.basis)} matrix at lambda={lam}", None


def _report_doc(ctx, rep):
    poles = []
    for r in rep.records:
        poles.append({
            "lambda": r.lam, "multiplicity": r.multiplicity, "residual_rank": r.residual.rank,
            "sv": _floats(r.residual.singular_values[:max(2 * r.residual.rank, 4)]),
            "rank_ambiguous": r.residual.ambiguous,
            "oracle_lambda": r.oracle_lam, "oracle_multiplicity": r.oracle_multiplicity,
            "angles": _floats(r.angles), "range_angle": r.range_angle,
            "residual_formula_err": r.formula_error,
        })
    doc = {"poles": poles, "cutoff": list(rep.cutoff), "warnings": list(rep.warnings), "meta": ctx.meta()}
    if rep.spectral_sum_error is not None:
        doc["spectral_sum_err"] = rep.spectral_sum_error
    rows = [("pole", "multiplicity", "angle_max")] + [
        (r.lam, r.multiplicity, float(r.angles.max()) if len(r.angles) else "") for r in rep.records]
    return doc, rows


def _spectral(ctx, args, reconstruct):
    from .residual import spectral_report

    if args.interval is None:
        raise ValidationError("--interval lo hi is required")
    t = ctx.conf.tolerances
    rep = spectral_report(ctx.op, ctx.patch(), args.interval, ctx.conf.contour.n_quad, t.rank_tol, t.cluster_tol,
                          t.pole_loc_tol, args.max_depth, reconstruct=reconstruct, seed=args.seed, threads=ctx.threads)
    doc, rows = _report_doc(ctx, rep)
    summary = ", ".join(f"{r.lam:.10g} (x{r.multiplicity})" for r in rep.records) or "none"
    return doc, f"poles in [{args.interval[0]:g}, {args.interval[1]:g}]: {summary}", rows


def cmd_poles(ctx, args):
    return _spectral(ctx, args, False)


def cmd_recon(ctx, args):
    return _spectral(ctx, args, True)


def cmd_gauge(ctx, args):
    from .coefficients import laplace
    from .experiments import uniqueness_experiment

    eps = args.eps
    gid = cfg.gauge_eps(ctx.conf.coeffs)
    if gid is not None:
        base, bid = laplace(), "laplace"
        eps = gid if eps is None else eps
    else:
        base, bid = ctx.coeffs
    eps = 0.05 if eps is None else eps
    lams = [complex(*p) for p in args.lambdas] if args.lambdas else [0, 2j, -2j]
    rep = uniqueness_experiment(ctx.mesh, base, eps, lams, ctx.conf.omega, args.clusters, args.refinements,
                                ctx.conf.tolerances.cluster_tol, ctx.conf.quad_order)
    levels = [{"h": lv.h, "dtn_discrepancy": [{"lambda": _cplx(k), "value": v} for k, v in lv.dtn_discrepancy.items()],
               "eig_discrepancy": lv.eig_discrepancy,
               "eigenvalues_base": _floats(lv.eigenvalues[0]), "eigenvalues_gauge": _floats(lv.eigenvalues[1])}
              for lv in rep.levels]
    doc = {"eps": rep.eps, "base": bid, "levels": levels,
           "dtn_ratios": [{"lambda": _cplx(k), "value": v} for k, v in rep.dtn_ratios.items()],
           "eig_ratio": rep.eig_ratio, "meta": ctx.meta()}
    rows = [("h", "lambda_re", "lambda_im", "dtn_discrepancy", "eig_discrepancy")] + [
        (lv.h, k.real, k.imag, v, lv.eig_discrepancy) for lv in rep.levels for k, v in lv.dtn_discrepancy.items()]
    worst = min(list(rep.dtn_ratios.values()) + [rep.eig_ratio])
    return doc, f"gauge eps={eps:g}: coarse DtN discrepancy {max(rep.levels[0].dtn_discrepancy.values()):.3e}, " \
                f"min refinement ratio {worst:.3g}", rows


def cmd_ucp(ctx, args):
    from .experiments import unique_continuation_check
    from .oracle import eigensolve

    pkg = eigensolve(ctx.op, count=args.count, cluster_tol=ctx.conf.tolerances.cluster_tol)
    rep = unique_continuation_check(ctx.op, ctx.patch(), pkg, args.count)
    doc = {"min_ratio": rep.min_ratio, "ratios": _floats(rep.ratios), "eigenvalues": _floats(rep.eigenvalues),
           "meta": ctx.meta()}
    rows = [("index", "lambda", "ratio")] + [(j, float(rep.eigenvalues[j]), float(rep.ratios[j])) for j in range(args.count)]
    return doc, f"ucp: min Neumann-trace ratio over {args.count} eigenfunctions = {rep.min_ratio:.6g}", rows


def cmd_density(ctx, args):
    from .experiments import density_check
    from .oracle import eigensolve

    lams = [complex(*p) for p in args.lambdas] if args.lambdas else list(ctx.conf.lambda_samples)
    pkg = eigensolve(ctx.op, count=max(args.count, 1), cluster_tol=ctx.conf.tolerances.cluster_tol)
    rep = density_check(ctx.op, ctx.patch(), lams, pkg, args.count)
    doc = {"lambda_samples": [_cplx(v) for v in lams], "sample_counts": list(rep.sample_counts),
           "span_dims": list(rep.span_dims), "errors": [_floats(r) for r in rep.errors], "meta": ctx.meta()}
    rows = [("samples", "span_dim") + tuple(f"err_{k}" for k in range(args.count))] + [
        (c, d) + tuple(float(v) for v in e) for c, d, e in zip(rep.sample_counts, rep.span_dims, rep.errors)]
    final = float(rep.errors[-1].max()) if args.count and len(rep.errors) else 0.0
    return doc, f"density: max projection error with {len(lams)} samples = {final:.3e}", rows


def cmd_verify(ctx, args):
    from .dtn import identity_suite

    res = identity_suite(ctx.op, ctx.patch(), args.instances, args.seed)
    checks = {k: {"max_residual": max(v), "residuals": v} for k, v in res.items()}
    passed = all(c["max_residual"] < IDENTITY_TOL for c in checks.values())
    doc = {"checks": checks, "tol": IDENTITY_TOL, "passed": passed, "meta": ctx.meta()}
    worst = max(c["max_residual"] for c in checks.values())
    return doc, f"verify: {len(checks)} identities x {args.instances} instances, worst residual {worst:.2e}, " \
                f"{'PASS' if passed else 'FAIL'}", None


COMMANDS = {
    "mesh": cmd_mesh, "assemble-info": cmd_assemble_info, "eig": cmd_eig, "dtn": cmd_dtn,
    "poles": cmd_poles, "recon": cmd_recon, "gauge": cmd_gauge, "ucp": cmd_ucp,
    "density": cmd_density, "verify": cmd_verify,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--mesh", help="mesh file or generator spec such as square:32")
    common.add_argument("--coeffs", help="builtin id (laplace, aniso-rot, gauge(eps)) or coefficient JSON file")
    common.add_argument("--omega", type=int, nargs="+", help="boundary labels forming the patch")
    common.add_argument("--out", help="output path (JSON; CSV written alongside)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--n-quad", dest="n_quad", type=int)
    common.add_argument("--rank-tol", dest="rank_tol", type=float)
    common.add_argument("--cluster-tol", dest="cluster_tol", type=float)
    common.add_argument("--pole-loc-tol", dest="pole_loc_tol", type=float)
    common.add_argument("--quad-order", dest="quad_order", type=int)
    common.add_argument("--seed", type=int, default=0)

    p = _Parser(prog="dtnrecon", description="Partial Dirichlet-to-Neumann maps, poles and reconstruction.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("mesh", parents=[common], help="generate, refine or validate a mesh")
    s.add_argument("--generate", choices=["square", "lshape"])
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--refine", type=int, default=0)
    sub.add_parser("assemble-info", parents=[common], help="assemble and summarize the operator")
    s = sub.add_parser("eig", parents=[common], help="oracle eigenpairs")
    s.add_argument("--count", type=int)
    s.add_argument("--interval", type=float, nargs=2)
    s = sub.add_parser("dtn", parents=[common], help="partial DtN matrix at one lambda")
    s.add_argument("--lambda", dest="lam", type=float, nargs=2, metavar=("RE", "IM"), default=(0.0, 0.0))
    for name in ("poles", "recon"):
        s = sub.add_parser(name, parents=[common], help="pole scan" if name == "poles" else "pole scan and reconstruction")
        s.add_argument("--interval", type=float, nargs=2)
        s.add_argument("--max-depth", dest="max_depth", type=int, default=12)
    s = sub.add_parser("gauge", parents=[common], help="gauge-pair uniqueness experiment")
    s.add_argument("--eps", type=float)
    s.add_argument("--lambdas", type=float, nargs=2, action="append", metavar=("RE", "IM"))
    s.add_argument("--clusters", type=int, default=10)
    s.add_argument("--refinements", type=int, default=1)
    s = sub.add_parser("ucp", parents=[common], help="Neumann-trace ratios of eigenfunctions")
    s.add_argument("--count", type=int, default=20)
    s = sub.add_parser("density", parents=[common], help="Poisson-range density check")
    s.add_argument("--count", type=int, default=5)
    s.add_argument("--lambdas", type=float, nargs=2, action="append", metavar=("RE", "IM"))
    s = sub.add_parser("verify", parents=[common], help="identity suite")
    s.add_argument("--instances", type=int, default=5)
    return p


def _csv_text(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        ctx = Context(args)
        doc, summary, rows = COMMANDS[args.command](ctx, args)
        if doc is None:
            if summary:
                print(summary, file=stdout)
            return EXIT_OK
        text = dump_json(_clean(doc))
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
            if rows:
                with open(os.path.splitext(args.out)[0] + ".csv", "w") as fh:
                    fh.write(_csv_text(rows))
            print(summary, file=stdout)
        else:
            stdout.write(text)
        if args.command == "verify" and not doc["passed"]:
            return EXIT_NUMERICAL
        return EXIT_OK
    except NumericalError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_NUMERICAL
    except ValidationError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    except (DtnError, OSError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
