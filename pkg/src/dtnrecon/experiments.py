"""Desk-scale experiments: gauge-pair uniqueness, Neumann-trace nondegeneracy and Poisson-range density."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .assembly import assemble, conormal_trace
from .coefficients import gauge_pair
from .dtn import dtn_matrix, poisson_apply, trace_basis
from .errors import InvalidArgument
from .mesh import refine_uniform, select_patch
from .oracle import eigensolve

DENSITY_LAMBDAS = (1j, -1j, 1 + 2j, 1 - 2j, 3 + 1j, 3 - 1j, 5 + 2j, 5 - 2j, 8 + 3j, 8 - 3j)


@dataclass(frozen=True)
class UniquenessLevel:
    h: float
    dtn_discrepancy: dict  # lam -> relative Frobenius discrepancy
    eig_discrepancy: float  # max relative eigenvalue discrepancy, first clusters
    eigenvalues: tuple  # (base, pulled back)


@dataclass(frozen=True)
class UniquenessReport:
    eps: float
    levels: tuple
    dtn_ratios: dict
    eig_ratio: float


def _lowest_clusters(op, n_clusters, cluster_tol):
    count = 2 * n_clusters
    while True:
        pkg = eigensolve(op, count=count, cluster_tol=cluster_tol)
        if len(pkg.clusters) > n_clusters or count >= len(op.idx_interior):
            break
        count *= 2
    n = sum(len(c) for c in pkg.clusters[:n_clusters])
    return pkg.eigenvalues[:n]


def _ratio(coarse, fine):
    return float(coarse / fine) if fine > 0 else float("inf")


def uniqueness_experiment(mesh, base, eps, lams, labels, n_clusters=10, refinements=1,
                          cluster_tol=1e-8, quad_order=2, n_steps=64):
    """Compare DtN matrices and spectra of ``base`` and its gauge pull-back on ``mesh`` and refinements.

    The first ``n_clusters`` clusters of the base operator fix the eigenvalue
    count; eigenvalues of both operators are compared index by index.
    """
    _, pulled, _ = gauge_pair(base, eps, n_steps=n_steps)
    lams = [complex(v) for v in lams]
    levels = []
    m = mesh
    for level in range(refinements + 1):
        if level:
            m = refine_uniform(m)
        op1 = assemble(m, base, quad_order)
        op2 = assemble(m, pulled, quad_order)
        patch = select_patch(m, labels)
        disc = {}
        for lam in lams:
            N1 = dtn_matrix(op1, lam, patch).N
            N2 = dtn_matrix(op2, lam, patch).N
            disc[lam] = float(np.linalg.norm(N1 - N2) / np.linalg.norm(N1))
        w1 = _lowest_clusters(op1, n_clusters, cluster_tol)
        w2 = eigensolve(op2, count=len(w1), cluster_tol=cluster_tol).eigenvalues[:len(w1)]
        ed = float(np.max(np.abs(w1 - w2) / np.abs(w1)))
        levels.append(UniquenessLevel(m.h(), disc, ed, (tuple(w1), tuple(w2))))
    first, last = levels[0], levels[-1]
    ratios = {lam: _ratio(first.dtn_discrepancy[lam], last.dtn_discrepancy[lam]) for lam in lams}
    return UniquenessReport(float(eps), tuple(levels), ratios, _ratio(first.eig_discrepancy, last.eig_discrepancy))


@dataclass(frozen=True)
class ContinuationReport:
    min_ratio: float
    ratios: np.ndarray
    eigenvalues: np.ndarray


def unique_continuation_check(op, patch, pkg, K):
    """Ratios ``||d_L u|_omega|| / ||d_L u|_bdry||`` of conormal-trace vectors for the first K eigenvectors.

    Inside a degenerate cluster the eigenvector basis is arbitrary, so each
    cluster is first rotated to the generalized singular basis of the pair
    (patch traces, full traces); the ratios are then basis independent and
    their minimum is the minimum over the whole eigenspace.
    """
    if K > len(pkg.eigenvalues):
        raise InvalidArgument(f"K={K} exceeds the {len(pkg.eigenvalues)} computed eigenpairs")
    pos = trace_basis(op, patch).positions
    ratios = []
    for cl in pkg.clusters:
        if len(ratios) >= K:
            break
        cl = list(cl)
        T = np.column_stack([conormal_trace(op, pkg.eigenvectors[:, k], pkg.eigenvalues[k]) for k in cl])
        Tw = T[pos]
        w = la.eigh(Tw.conj().T @ Tw, T.conj().T @ T, eigvals_only=True)
        ratios.extend(np.sqrt(np.clip(w, 0.0, None)).tolist())
    ratios = np.array(ratios[:K])
    return ContinuationReport(float(ratios.min()) if K else float("nan"), ratios, pkg.eigenvalues[:K].copy())


@dataclass(frozen=True)
class DensityReport:
    sample_counts: tuple
    errors: np.ndarray  # (stages, K)
    span_dims: tuple


def _check_samples(lams):
    lams = [complex(v) for v in lams]
    for v in lams:
        if v.imag == 0:
            raise InvalidArgument(f"density samples must be nonreal, got {v}")
    pending = list(lams)
    while pending:
        v = pending.pop(0)
        mates = [j for j, w in enumerate(pending) if abs(w - v.conjugate()) <= 1e-14 * max(abs(v), 1)]
        if not mates:
            raise InvalidArgument(f"density samples must be closed under conjugation; {v} has no partner")
        pending.pop(mates[0])
    return lams


def _pair_prefixes(lams):
    """Stage ends of the nested sequence: each stage adds one conjugate pair."""
    ends, seen = [], []
    for j, v in enumerate(lams):
        if any(abs(w - v.conjugate()) <= 1e-14 * max(abs(v), 1) for w in seen):
            ends.append(j + 1)
        seen.append(v)
    return ends


def density_check(op, patch, lams, pkg, K, drop_tol=1e-10):
    """Relative B-norm errors of the first K eigenvectors projected onto the Poisson ranges.

    The samples form a nested sequence whose stages add one conjugate pair
    each; the span is orthonormalized incrementally in the B inner product
    (two Gram-Schmidt passes, then pivoted QR to drop dependent columns).
    """
    lams = _check_samples(lams)
    if K > len(pkg.eigenvalues):
        raise InvalidArgument(f"K={K} exceeds the {len(pkg.eigenvalues)} computed eigenpairs")
    ends = _pair_prefixes(lams)
    if K == 0:
        return DensityReport(tuple(ends), np.zeros((len(ends), 0)), tuple(0 for _ in ends))
    L = la.cholesky(op.B.toarray(), lower=True)  # B = L L^T
    U = L.T @ pkg.eigenvectors[:, :K]
    unorm = np.linalg.norm(U, axis=0)
    m = len(patch)
    Q = np.zeros((op.n, 0), complex)
    errors, dims = [], []
    start = 0
    for end in ends:
        cols = [poisson_apply(op, lam, e, patch) for lam in lams[start:end] for e in np.eye(m)]
        W = L.T @ np.column_stack(cols)
        scale = np.linalg.norm(W, axis=0).max()
        for _ in range(2):
            W = W - Q @ (Q.conj().T @ W)
        Qn, R, _ = la.qr(W, mode="economic", pivoting=True)
        Qn = Qn[:, np.abs(np.diag(R)) > drop_tol * scale]
        for _ in range(2):  # restore orthogonality lost in weak directions
            Qn = la.qr(Qn - Q @ (Q.conj().T @ Qn), mode="economic")[0]
        Q = np.hstack([Q, Qn])
        resid = U - Q @ (Q.conj().T @ U)
        errors.append(np.linalg.norm(resid, axis=0) / unorm)
        dims.append(Q.shape[1])
        start = end
    return DensityReport(tuple(ends), np.array(errors), tuple(dims))
