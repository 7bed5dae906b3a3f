"""Direct ground truth for the discrete Dirichlet operator: eigenpairs, resolvent, contour projections."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, InvalidArgument

DENSE_LIMIT = 600


@dataclass(frozen=True)
class ContourSpec:
    """Circle ``|z - center| = radius`` sampled by ``n_quad`` trapezoid nodes.

    Nodes sit at angles ``2 pi (j + 1/2) / n_quad``: they come in conjugate
    pairs and never touch the real axis.
    """

    center: complex
    radius: float
    n_quad: int = 64

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgument(f"contour radius must be positive, got {self.radius!r}")
        n = int(self.n_quad)
        if n < 2 or n & (n - 1):
            raise InvalidArgument(f"n_quad must be a power of two >= 2, got {self.n_quad!r}")

    def nodes(self):
        theta = 2 * np.pi * (np.arange(self.n_quad) + 0.5) / self.n_quad
        offsets = self.radius * np.exp(1j * theta)
        return self.center + offsets, offsets / self.n_quad

    def contains(self, z):
        return abs(z - self.center) < self.radius


@dataclass(frozen=True)
class EigenPackage:
    """Ascending eigenvalues, B-orthonormal eigenvectors (full length, zero on the boundary) and clusters."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clusters: tuple
    cluster_tol: float

    def cluster_values(self):
        return np.array([self.eigenvalues[list(c)].mean() for c in self.clusters])

    def cluster_vectors(self, k):
        return self.eigenvectors[:, list(self.clusters[k])]

    def in_interval(self, lo, hi):
        return [k for k, v in enumerate(self.cluster_values()) if lo <= v <= hi]


def cluster_indices(values, cluster_tol):
    """Group consecutive sorted values whose relative gap is below ``cluster_tol``."""
    groups = []
    for i, v in enumerate(values):
        if groups and abs(v - values[groups[-1][-1]]) <= cluster_tol * max(abs(v), abs(values[groups[-1][-1]]), 1e-300):
            groups[-1].append(i)
        else:
            groups.append([i])
    return tuple(tuple(g) for g in groups)


def spectrum_lower_bound(op):
    """Lower bound ``c_min - |b|^2_max / C`` of the discrete Dirichlet spectrum."""
    from .coefficients import check_sample
    from .quadrature import quadrature_points

    expr = op.expression
    if expr is None:
        return -1.0
    pts, _, _ = quadrature_points(op.mesh, 2)
    pts = pts.reshape(-1, 2)
    s = expr.sample(pts)
    C = check_sample(s, pts)
    b2 = float((np.abs(s.b) ** 2).sum(-1).max())
    return float(np.real(s.c).min() - b2 / C)


def _normalize_phase(U):
    for j in range(U.shape[1]):
        k = int(np.argmax(np.abs(U[:, j])))
        ph = U[k, j] / abs(U[k, j])
        U[:, j] = U[:, j] / ph
    return U


def eigensolve(op, count=None, interval=None, cluster_tol=1e-8, tol=0.0):
    """Lowest eigenpairs of the pencil ``(K_ii, B_ii)``.

    Give ``count`` (lowest ``count`` eigenvalues, extended so that the last
    cluster is complete) or ``interval=(lo, hi)``.  Shift-invert Lanczos is
    used for large problems and a dense solver for small ones.
    """
    if (count is None) == (interval is None):
        raise InvalidArgument("give exactly one of count or interval")
    blk = op.blocks()
    Kii, Bii = blk["Kii"], blk["Bii"]
    n = Kii.shape[0]
    if count is not None and (int(count) != count or count < 0):
        raise InvalidArgument(f"count must be a nonnegative integer, got {count!r}")
    if count == 0:
        return EigenPackage(np.zeros(0), np.zeros((op.n, 0)), (), cluster_tol)

    if n <= DENSE_LIMIT:
        w, V = la.eigh(Kii.toarray(), Bii.toarray())
    else:
        sigma = spectrum_lower_bound(op) - 1.0
        fac = op.factor(sigma)
        OPinv = spla.LinearOperator((n, n), matvec=fac.solve, dtype=float if fac.is_real else complex)
        v0 = np.ones(n) / np.sqrt(n)
        if not op.is_real:
            v0 = v0.astype(complex)
        k = count + 6 if count is not None else 12
        while True:
            k = min(k, n - 2)
            try:
                w, V = spla.eigsh(Kii, k=k, M=Bii, sigma=sigma, which="LM", OPinv=OPinv, v0=v0, tol=tol)
            except spla.ArpackNoConvergence as exc:
                raise ConvergenceError(f"shift-invert Lanczos did not converge for k={k}") from exc
            order = np.argsort(w)
            w, V = w[order], V[:, order]
            top = w[-1]
            done = (count is not None and k >= count + 1 and _last_cluster_closed(w, count, cluster_tol)) \
                or (interval is not None and top > interval[1])
            if done or k >= n - 2:
                break
            k = 2 * k
    w = np.real(w)
    if count is not None:
        keep = count
        while keep < len(w) and abs(w[keep] - w[keep - 1]) <= cluster_tol * max(abs(w[keep]), 1e-300):
            keep += 1
        sel = np.arange(min(keep, len(w)))
    else:
        sel = np.flatnonzero(w <= interval[1])
    w, V = w[sel], V[:, sel]
    clusters = cluster_indices(w, cluster_tol)
    V = _b_orthonormalize_clusters(V, Bii, clusters)
    w = np.array([np.real(np.vdot(V[:, j], Kii @ V[:, j])) for j in range(V.shape[1])])
    V = _normalize_phase(V)
    U = np.zeros((op.n, V.shape[1]), dtype=V.dtype)
    U[op.idx_interior] = V
    pkg = EigenPackage(w, U, clusters, cluster_tol)
    if interval is not None:
        keep = [j for j in range(len(w)) if interval[0] <= w[j] <= interval[1]]
        pkg = EigenPackage(w[keep], U[:, keep], cluster_indices(w[keep], cluster_tol), cluster_tol)
    return pkg


def _last_cluster_closed(w, count, cluster_tol):
    j = count
    while j < len(w) and abs(w[j] - w[j - 1]) <= cluster_tol * max(abs(w[j]), 1e-300):
        j += 1
    return j < len(w)


def _b_orthonormalize_clusters(V, Bii, clusters):
    V = np.array(V)
    for c in clusters:
        c = list(c)
        X = V[:, c]
        G = X.conj().T @ (Bii @ X)
        L = np.linalg.cholesky(0.5 * (G + G.conj().T))
        V[:, c] = la.solve_triangular(L, X.conj().T, lower=True).conj().T
    return V


def resolvent_apply(op, lam, f):
    """``(A - lam)^{-1} f``: solves ``(K_ii - lam B_ii) w_i = (B f)_i`` and extends by zero."""
    f = np.asarray(f)
    if f.shape != (op.n,):
        raise InvalidArgument(f"field must have length {op.n}")
    lam = complex(lam)
    rhs = (op.B @ f)[op.idx_interior]
    dtype = np.result_type(op.K.dtype, f.dtype, complex if lam.imag else float)
    w = np.zeros(op.n, dtype=dtype)
    w[op.idx_interior] = op.factor(lam).solve(rhs)
    return w


def spectral_projection(op, contour, f, threads=1):
    """Trapezoid rule for ``-(1/2 pi i) \\oint (A - z)^{-1} f dz``."""
    z, wts = contour.nodes()

    def term(j):
        return wts[j] * resolvent_apply(op, z[j], f)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            terms = list(ex.map(term, range(len(z))))
    else:
        terms = [term(j) for j in range(len(z))]
    out = -sum(terms)
    if op.is_real and not np.iscomplexobj(f) and np.isreal(contour.center):
        out = out.real
    return out


def direct_projection(pkg, op, cluster, f):
    """Projector onto a cluster's eigenspace built from the eigensolve: ``U U^H B f``."""
    U = pkg.cluster_vectors(cluster)
    return U @ (U.conj().T @ (op.B @ f))
