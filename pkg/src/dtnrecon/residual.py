"""Residuals of the partial DtN map by contour quadrature, pole scanning and eigenspace reconstruction."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as la

from .dtn import dtn_matrix, patch_conormal, poisson_adjoint, poisson_apply
from .errors import InvalidArgument, UniqueContinuationError
from .oracle import ContourSpec, cluster_indices, spectral_projection

RANK_TOL = 1e-8


@dataclass(frozen=True)
class ResidualMatrix:
    """Zeroth contour moment ``(1/2 pi i) \\oint N(z) dz`` over the trace basis.

    ``moment1`` is ``(1/2 pi i) \\oint (z - center) N(z) dz``.  ``ritz`` holds
    the pole estimates of the block Hankel moment pencil (including leaked
    exterior poles) and ``count`` its rank; ``pole`` is the mean of the
    estimates inside the circle (the centre when there are none).
    """

    pole: float
    R: np.ndarray
    rank: int
    singular_values: np.ndarray
    contour: ContourSpec
    ambiguous: bool
    moment1: np.ndarray = field(repr=False)
    threshold: float = 0.0
    ritz: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    count: int = 0
    saturated: bool = False

    def inside(self):
        return self.ritz[np.abs(self.ritz - self.contour.center) < self.contour.radius]


def contour_moments(op, patch, contour, orders=(0, 1), threads=1, scaled=False):
    """Trapezoid moments ``(1/2 pi i) \\oint ((z - c)/s)^p N(z) dz`` and ``max_j ||N(z_j)||_F``.

    ``s`` is the radius when ``scaled`` and 1 otherwise.  For a real centre
    only the upper-half nodes are evaluated and ``N(conj z) = N(z)^H``
    supplies the rest, so the moments are Hermitian.
    """
    z, w = contour.nodes()
    c = contour.center
    s = contour.radius if scaled else 1.0
    symmetric = float(np.imag(c)) == 0.0
    idx = [j for j in range(len(z)) if z[j].imag > 0] if symmetric else list(range(len(z)))

    def node(j):
        return dtn_matrix(op, z[j], patch).N

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            mats = list(ex.map(node, idx))
    else:
        mats = [node(j) for j in idx]
    scale = max(float(np.linalg.norm(Nj)) for Nj in mats)
    out = []
    for p in orders:
        acc = np.zeros_like(mats[0], dtype=complex)
        for j, Nj in zip(idx, mats):
            X = Nj * (w[j] * ((z[j] - c) / s) ** p)
            acc += X + X.conj().T if symmetric else X
        if symmetric:
            acc = 0.5 * (acc + acc.conj().T)
            if op.is_real:
                acc = acc.real
        out.append(acc)
    return out, scale


def _rank(sv, threshold):
    rank = int(np.sum(sv > threshold))
    ambiguous = bool(np.any((sv > threshold / 10) & (sv < threshold * 10)))
    return rank, ambiguous


def _hankel_ritz(moments, rank_tol, floor, max_blocks):
    """Eigenvalues of the block Hankel pencil ``(H1, H0)`` on the significant range of ``H0``.

    ``moments[p]`` are scaled moments.  The block count grows while the rank
    of ``H0`` grows, which resolves eigenvalues whose traces on the patch are
    parallel.  Returns ``(estimates, rank, saturated)`` in scaled coordinates.
    """
    m = moments[0].shape[0]
    prev = None
    for K in range(1, max_blocks + 1):
        H0 = np.block([[moments[i + j] for j in range(K)] for i in range(K)])
        w, V = la.eigh(H0)
        thr = rank_tol * max(float(np.abs(w).max()), floor)
        keep = np.abs(w) > thr
        r = int(keep.sum())
        if prev is not None and r <= prev[0]:
            break
        prev = (r, K, w, V, keep)
    r, K, w, V, keep = prev
    if r == 0:
        return np.zeros(0, complex), 0, False
    H1 = np.block([[moments[i + j + 1] for j in range(K)] for i in range(K)])
    Vs = V[:, keep]
    theta = la.eigvals(Vs.conj().T @ H1 @ Vs, np.diag(w[keep]))
    return np.sort_complex(theta), r, r == K * m


def residual_matrix(op, patch, contour, rank_tol=RANK_TOL, threads=1, max_blocks=4):
    """Residual of the partial DtN map inside ``contour``, with rank and pole estimates."""
    rho = contour.radius
    moments, scale = contour_moments(op, patch, contour, range(2 * max_blocks), threads, scaled=True)
    R0 = moments[0]
    sv = la.svdvals(R0)
    floor = rho * scale
    threshold = rank_tol * max(float(sv[0]) if sv.size else 0.0, floor)
    rank, ambiguous = _rank(sv, threshold)
    theta, count, saturated = _hankel_ritz(moments, rank_tol, floor, max_blocks)
    c = float(np.real(contour.center))
    ritz = c + rho * theta
    inside = ritz[np.abs(ritz - c) < rho]
    pole = float(np.mean(inside.real)) if len(inside) else c
    return ResidualMatrix(pole, R0, rank, sv, contour, ambiguous, rho * moments[1], threshold, ritz, count, saturated)


def contour_around(pkg, cluster, n_quad=64, fraction=0.5):
    """Circle around an oracle cluster with radius ``fraction`` times the distance to its neighbours."""
    vals = pkg.cluster_values()
    v = vals[cluster]
    others = np.delete(vals, cluster)
    gap = np.min(np.abs(others - v)) if len(others) else max(abs(v), 1.0)
    return ContourSpec(float(v), float(fraction * gap), n_quad)


# -- pole scan ---------------------------------------------------------------------------


class PoleEstimate(NamedTuple):
    pole: float
    multiplicity: int
    residual: ResidualMatrix


@dataclass
class PoleScan:
    poles: list
    warnings: list
    circles: int

    def __iter__(self):
        return iter((p.pole, p.multiplicity) for p in self.poles)

    def __len__(self):
        return len(self.poles)


def pole_scan(op, patch, interval, n_quad=64, max_depth=12, rank_tol=RANK_TOL,
              cluster_tol=1e-8, pole_loc_tol=1e-8, threads=1):
    """Locate the poles of the partial DtN map in ``interval`` with their multiplicities.

    Each circle yields pole estimates from its block Hankel moment pencil.  Circles holding
    more than one cluster are split in the widest gap between estimates; a
    circle holding one cluster is replaced by a tighter circle around it, and
    that final circle's residual rank gives the multiplicity.
    """
    a, b = (float(v) for v in interval)
    if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
        raise InvalidArgument(f"interval must be finite with lo < hi, got {interval!r}")
    stack = [(a, b, 0)]
    leaves = []
    warnings = []
    circles = 0
    while stack:
        lo, hi, depth = stack.pop()
        spec = ContourSpec(0.5 * (lo + hi), 0.5 * (hi - lo), n_quad)
        res = residual_matrix(op, patch, spec, rank_tol, threads)
        circles += 1
        ritz = res.ritz
        inside = np.sort(res.inside().real)
        if len(inside) == 0:
            continue
        groups = [inside[list(g)] for g in cluster_indices(inside, cluster_tol)]
        saturated = res.saturated
        if len(groups) == 1 and not saturated:
            leaves.append((groups[0], ritz, spec))
            continue
        if depth >= max_depth or spec.radius < pole_loc_tol * max(1.0, abs(spec.center)):
            warnings.append(f"unresolved circle [{lo:.12g}, {hi:.12g}] at depth {depth}")
            leaves.extend((g, ritz, spec) for g in groups)
            continue
        if saturated:
            split = spec.center
        else:
            means = np.array([g.mean() for g in groups])
            k = int(np.argmax(np.diff(means)))
            split = 0.5 * (groups[k].max() + groups[k + 1].min())
        stack.append((split, hi, depth + 1))
        stack.append((lo, split, depth + 1))

    poles = []
    for group, ritz, spec in leaves:
        centre = float(group.mean())
        others = [abs(t - centre) for t in ritz if abs(t.real - centre) > cluster_tol * max(abs(centre), 1.0)]
        room = spec.radius - abs(centre - spec.center.real)
        radius = 0.5 * min([room] + others)
        if radius <= 0:
            warnings.append(f"pole estimate {centre:.12g} on a contour; skipped")
            continue
        final = residual_matrix(op, patch, ContourSpec(centre, radius, n_quad), rank_tol, threads)
        circles += 1
        inside = final.inside()
        if final.rank != len(inside):
            warnings.append(f"pole {final.pole:.12g}: residual rank {final.rank} but {len(inside)} Ritz values")
        if final.ambiguous:
            warnings.append(f"pole {final.pole:.12g}: rank decision ambiguous")
        if a <= final.pole <= b and final.rank > 0:
            poles.append(PoleEstimate(final.pole, final.rank, final))
    poles.sort(key=lambda p: p.pole)
    return PoleScan(poles, warnings, circles)


# -- residual formula and reconstruction ----------------------------------------------------


def find_cluster(pkg, pole, rel_tol=1e-6):
    vals = pkg.cluster_values()
    if len(vals) == 0:
        raise InvalidArgument("eigen package is empty")
    k = int(np.argmin(np.abs(vals - pole)))
    if abs(vals[k] - pole) > rel_tol * max(abs(pole), 1.0):
        raise InvalidArgument(f"no oracle cluster within {rel_tol:g} of pole {pole}")
    return k


def verify_residual_formula(op, patch, lam_k, eta, mu, phi, pkg, n_quad=64, rank_tol=RANK_TOL):
    """Relative defect of ``Res M phi = (eta - lam)(conj mu - lam) gamma(mu)' E_lam gamma(eta) phi``.

    The left side is the DtN contour residual; the right side uses the
    Poisson operator, the resolvent contour projection and the Poisson adjoint.
    """
    k = find_cluster(pkg, lam_k)
    contour = contour_around(pkg, k, n_quad)
    lam = float(pkg.cluster_values()[k])
    phi = np.asarray(phi)
    lhs = residual_matrix(op, patch, contour, rank_tol).R @ phi
    proj = spectral_projection(op, contour, poisson_apply(op, eta, phi, patch))
    rhs = (eta - lam) * (np.conj(mu) - lam) * poisson_adjoint(op, mu, proj, patch)
    scale = np.linalg.norm(rhs)
    if scale == 0:
        return float(np.linalg.norm(lhs))
    return float(np.linalg.norm(lhs - rhs) / scale)


def b_orthonormalize(V, B):
    G = V.conj().T @ (B @ V)
    L = np.linalg.cholesky(0.5 * (G + G.conj().T))
    return la.solve_triangular(L, V.conj().T, lower=True).conj().T


def principal_angles(Q1, Q2, B):
    """Principal angles (radians, descending) between B-orthonormal column spans, via sines."""
    if Q1.shape[1] == 0 or Q2.shape[1] == 0:
        return np.zeros(0)
    resid = Q1 - Q2 @ (Q2.conj().T @ (B @ Q1))
    G = resid.conj().T @ (B @ resid)
    s = np.sqrt(np.clip(np.linalg.eigvalsh(0.5 * (G + G.conj().T)), 0.0, 1.0))
    return np.sort(np.arcsin(s))[::-1]


def range_angle(R, rank, T):
    """Largest Euclidean principal angle between the top-``rank`` range of ``R`` and ``span T``."""
    if rank == 0:
        return 0.0
    U = la.svd(R)[0][:, :rank]
    Q = la.orth(T)
    resid = U - Q @ (Q.conj().T @ U)
    return float(np.arcsin(min(1.0, la.svdvals(resid)[0])))


@dataclass(frozen=True)
class ReconstructedBasis:
    vectors: np.ndarray
    angles: np.ndarray
    range_residual: float
    range_angle: float
    tau_condition: float


def reconstruct_basis(op, patch, pole, residual, pkg, uc_tol=1e-10):
    """Eigenbasis ``e_i = tau^{-1} Res M phi_i`` from the residual.

    ``tau`` maps the oracle eigenspace at ``pole`` to Neumann traces on the
    patch; it is injective there by unique continuation, but traces of
    different eigenspaces may coincide, so the inverse is taken on this
    eigenspace alone.  ``range_residual`` measures how far ``Res M phi_i``
    lies from ``tau`` of the eigenspace.
    """
    k = find_cluster(pkg, pole)
    cl = list(pkg.clusters[k])
    r = len(cl)
    if residual.rank != r:
        raise InvalidArgument(f"residual rank {residual.rank} differs from oracle multiplicity {r} at {pole}")
    Q = pkg.eigenvectors[:, cl]
    T = np.column_stack([patch_conormal(op, Q[:, j], pkg.eigenvalues[c], patch) for j, c in enumerate(cl)])
    sv = la.svdvals(T)
    cond = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    if cond < uc_tol:
        raise UniqueContinuationError(
            f"Neumann traces of the eigenspace at {pole} are numerically dependent (ratio {cond:.2e}); "
            "patch too coarse for the mesh")
    _, _, Vh = la.svd(residual.R)
    Phi = Vh[:r].conj().T
    Psi = residual.R @ Phi
    C, *_ = la.lstsq(T, Psi)
    rr = float(np.linalg.norm(T @ C - Psi) / np.linalg.norm(Psi))
    E = b_orthonormalize(Q @ C, op.B)
    angles = principal_angles(E, Q, op.B)
    return ReconstructedBasis(E, angles, rr, range_angle(residual.R, r, T), cond)


def reconstruct_operator(records, op, vectors):
    """Relative error of the truncated spectral sum ``sum lam_k (u, e)_B e`` against ``K u``.

    ``records`` is an iterable of ``(lam_k, E_k)`` with B-orthonormal columns
    ``E_k``; errors are measured on interior rows as ``||K u - B S u|| / ||K u||``.
    """
    vectors = np.atleast_2d(np.asarray(vectors).T).T
    out = np.zeros(vectors.shape, dtype=np.result_type(vectors.dtype, op.K.dtype))
    for lam, E in records:
        out = out + lam * (E @ (E.conj().T @ (op.B @ vectors)))
    i = op.idx_interior
    Ku = (op.K @ vectors)[i]
    BS = (op.B @ out)[i]
    errs = np.linalg.norm(Ku - BS, axis=0) / np.maximum(np.linalg.norm(Ku, axis=0), 1e-300)
    return out, errs


# -- report -----------------------------------------------------------------------------


@dataclass(frozen=True)
class PoleRecord:
    lam: float
    multiplicity: int
    residual: ResidualMatrix
    oracle_lam: float | None
    oracle_multiplicity: int | None
    basis: np.ndarray | None
    angles: np.ndarray
    range_angle: float | None
    formula_error: float | None


@dataclass(frozen=True)
class SpectralReport:
    records: tuple
    cutoff: tuple
    warnings: tuple
    spectral_sum_error: float | None = None

    def pairs(self):
        return [(r.lam, r.basis) for r in self.records if r.basis is not None]


def spectral_report(op, patch, interval, n_quad=64, rank_tol=RANK_TOL, cluster_tol=1e-8,
                    pole_loc_tol=1e-8, max_depth=12, reconstruct=True, eta=2j, mu=3j,
                    seed=0, threads=1):
    """Scan ``interval`` for poles and compare each against the eigensolver oracle.

    Every record carries the residual, the residual-formula defect for a seeded
    random trace vector and, with ``reconstruct``, the reconstructed eigenbasis
    and its principal angles against the oracle eigenspace.
    """
    from .oracle import eigensolve, spectrum_lower_bound

    lo, hi = (float(v) for v in interval)
    scan = pole_scan(op, patch, (lo, hi), n_quad, max_depth, rank_tol, cluster_tol, pole_loc_tol, threads)
    pkg = eigensolve(op, interval=(spectrum_lower_bound(op) - 1.0, hi + (hi - lo) + 1.0), cluster_tol=cluster_tol)
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal(len(patch))
    warnings = list(scan.warnings)
    records = []
    for p in scan.poles:
        try:
            k = find_cluster(pkg, p.pole, max(pole_loc_tol, 1e-12) * 100)
        except InvalidArgument:
            warnings.append(f"pole {p.pole:.12g} has no oracle counterpart")
            records.append(PoleRecord(p.pole, p.multiplicity, p.residual, None, None, None, np.zeros(0), None, None))
            continue
        lam_k = float(pkg.cluster_values()[k])
        size = len(pkg.clusters[k])
        err = verify_residual_formula(op, patch, lam_k, eta, mu, phi, pkg, n_quad, rank_tol)
        basis, angles, rangle = None, np.zeros(0), None
        if reconstruct and p.multiplicity == size:
            rb = reconstruct_basis(op, patch, p.pole, p.residual, pkg)
            basis, angles, rangle = rb.vectors, rb.angles, rb.range_angle
        elif reconstruct:
            warnings.append(f"pole {p.pole:.12g}: rank {p.multiplicity} but oracle multiplicity {size}")
        records.append(PoleRecord(p.pole, p.multiplicity, p.residual, lam_k, size, basis, angles, rangle, err))
    sse = None
    pairs = [(r.oracle_lam, r.basis) for r in records if r.basis is not None]
    if reconstruct and pairs:
        coeffs = rng.standard_normal(sum(E.shape[1] for _, E in pairs))
        # test vector in the covered span built from the oracle eigenvectors
        cols = [j for r in records if r.basis is not None for j in pkg.clusters[find_cluster(pkg, r.oracle_lam)]]
        u = pkg.eigenvectors[:, cols] @ coeffs
        sse = float(reconstruct_operator([(r.lam, r.basis) for r in records if r.basis is not None], op, u)[1][0])
    return SpectralReport(tuple(records), (lo, hi), tuple(warnings), sse)
