"""P1 assembly of the sesquilinear form and mass matrix, Dirichlet solves, variational conormal.

Matrix convention: ``K[p, q] = Phi(hat_q, hat_p)`` and ``B[p, q] = (hat_q, hat_p)``,
so for nodal vectors ``Phi(u, v) = v^H K u``.  A functional on boundary nodes
(``t_p = <d_L u, hat_p>``) pairs with trace coefficients ``phi`` as ``phi^H t``.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coefficients import check_sample
from .errors import InvalidArgument, NearEigenvalueError, ValidationError
from .quadrature import quadrature_points

COND_LIMIT = 1e12
HERMITIAN_RTOL = 1e-12


class ShiftedFactor:
    """Sparse LU of ``K_ii - lam B_ii`` with a 1-norm condition estimate."""

    def __init__(self, matrix, lam):
        self.lam = complex(lam)
        self.is_real = not np.iscomplexobj(matrix.data)
        try:
            self._lu = spla.splu(matrix.tocsc())
        except RuntimeError as exc:  # exactly singular pivot
            raise NearEigenvalueError(lam, np.inf) from exc
        n = matrix.shape[0]
        dtype = matrix.dtype
        inv = spla.LinearOperator((n, n), matvec=self.solve, rmatvec=self.solve_adjoint, dtype=dtype)
        # t=1 keeps Hager's estimator deterministic (no random restarts)
        inv_norm = spla.onenormest(inv, t=1) if n > 1 else abs(1 / matrix.toarray()[0, 0])
        self.condition = float(abs(matrix).sum(axis=0).max() * inv_norm)
        if not np.isfinite(self.condition) or self.condition > COND_LIMIT:
            raise NearEigenvalueError(lam, self.condition)

    def _apply(self, rhs, trans):
        rhs = np.asarray(rhs)
        if self.is_real and np.iscomplexobj(rhs):
            return self._lu.solve(np.ascontiguousarray(rhs.real), trans=trans) + \
                1j * self._lu.solve(np.ascontiguousarray(rhs.imag), trans=trans)
        return self._lu.solve(np.ascontiguousarray(rhs), trans=trans)

    def solve(self, rhs):
        return self._apply(rhs, "N")

    def solve_adjoint(self, rhs):
        return self._apply(rhs, "H" if not self.is_real else "T")


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Assembled pencil of the Dirichlet operator.

    ``K`` and ``B`` are CSR over all nodes; ``idx_interior``/``idx_boundary``
    partition the nodes; ``boundary_mass`` is the 1D L2 pairing on the boundary.
    """

    mesh: object
    K: sp.csr_matrix
    B: sp.csr_matrix
    idx_interior: np.ndarray
    idx_boundary: np.ndarray
    boundary_mass: sp.csr_matrix
    expression: object = None
    _cache: OrderedDict = field(default_factory=OrderedDict, repr=False)
    _lock: object = field(default_factory=threading.Lock, repr=False)
    cache_size: int = 8

    @property
    def n(self):
        return self.K.shape[0]

    @property
    def is_real(self):
        return not np.iscomplexobj(self.K.data)

    def block(self, M, rows, cols):
        return M[rows][:, cols]

    def blocks(self):
        """Interior/boundary blocks of K and B, computed once."""
        key = "blocks"
        with self._lock:
            if key not in self._cache:
                i, b = self.idx_interior, self.idx_boundary
                K, B = self.K.tocsr(), self.B.tocsr()
                self._cache[key] = {
                    "Kii": K[i][:, i].tocsc(), "Bii": B[i][:, i].tocsc(),
                    "Kib": K[i][:, b].tocsc(), "Bib": B[i][:, b].tocsc(),
                    "Kbi": K[b][:, i].tocsr(), "Bbi": B[b][:, i].tocsr(),
                    "Kbb": K[b][:, b].tocsr(), "Bbb": B[b][:, b].tocsr(),
                }
                self._cache.move_to_end(key, last=False)
            return self._cache[key]

    def boundary_position(self, nodes):
        """Positions of global node indices within ``idx_boundary``."""
        pos = np.searchsorted(self.idx_boundary, nodes)
        if np.any(pos >= len(self.idx_boundary)) or np.any(self.idx_boundary[np.minimum(pos, len(self.idx_boundary) - 1)] != nodes):
            raise InvalidArgument("node is not a boundary node")
        return pos

    def factor(self, lam):
        """Factorization of ``K_ii - lam B_ii``, cached by ``lam``."""
        lam = complex(lam)
        key = ("lu", lam.real, lam.imag)
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        blk = self.blocks()
        M = blk["Kii"] - lam * blk["Bii"] if lam.imag else blk["Kii"] - lam.real * blk["Bii"]
        fac = ShiftedFactor(M, lam)
        with self._lock:
            self._cache[key] = fac
            lus = [k for k in self._cache if k != "blocks"]
            while len(lus) > self.cache_size:
                self._cache.pop(lus.pop(0))
        return fac


def _local_matrices(mesh, expression, quad_order):
    pts, wts, bary = quadrature_points(mesh, quad_order)
    nt, nq = wts.shape
    flat = pts.reshape(-1, 2)
    sample = expression.sample(flat)
    check_sample(sample, flat, expression.ellipticity_constant)
    A = sample.A.reshape(nt, nq, 2, 2)
    b = sample.b.reshape(nt, nq, 2)
    c = np.real(sample.c).reshape(nt, nq)

    corners = mesh.nodes[mesh.triangles]
    area = mesh.signed_areas()
    # gradients of barycentric coordinates, (nt, 3, 2)
    e = np.stack([corners[:, 2] - corners[:, 1], corners[:, 0] - corners[:, 2], corners[:, 1] - corners[:, 0]], 1)
    G = np.stack([-e[..., 1], e[..., 0]], -1) / (2 * area)[:, None, None]

    Abar = np.einsum("tq,tqjk->tjk", wts, A)
    Ke = np.einsum("tpj,tjk,tqk->tpq", G, Abar, G)
    if np.any(b != 0):
        # a_j d_j hat_q conj(hat_p) + conj(a_j) hat_q conj(d_j hat_p)
        bw = np.einsum("tw,twj,wp->tpj", wts, b, bary)  # int b hat_p
        Ke = Ke + np.einsum("tpj,tqj->tpq", bw, G) + np.einsum("tqj,tpj->tpq", np.conj(bw), G)
    if np.any(c != 0):
        Ke = Ke + np.einsum("tw,tw,wp,wq->tpq", wts, c, bary, bary)
    Me = (area / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))[None]
    return Ke, Me


def _scatter(mesh, local):
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    M = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M.sum_duplicates()
    return M


def _boundary_mass(mesh):
    e = mesh.boundary_edges
    d = mesh.nodes[e[:, 1]] - mesh.nodes[e[:, 0]]
    ln = np.sqrt((d**2).sum(1))
    loc = ln[:, None, None] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])[None]
    rows = np.repeat(e, 2, axis=1).ravel()
    cols = np.tile(e, (1, 2)).ravel()
    n = mesh.n_nodes
    return sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble(mesh, expression, quad_order=2):
    """Assemble ``K`` (the form) and ``B`` (mass) on P1 elements."""
    if int(quad_order) != quad_order or quad_order < 1:
        raise InvalidArgument(f"quadrature order must be >= 1, got {quad_order!r}")
    Ke, Me = _local_matrices(mesh, expression, quad_order)
    if np.iscomplexobj(Ke) and np.abs(Ke.imag).max() == 0:
        Ke = Ke.real
    K = _scatter(mesh, Ke)
    B = _scatter(mesh, Me)
    asym = abs(K - K.conj().T).max() if K.nnz else 0.0
    if asym > HERMITIAN_RTOL * max(abs(K).max(), 1e-300):
        raise ValidationError(f"assembled form matrix is not Hermitian (defect {asym:.3e})")
    bnd = mesh.boundary_nodes
    interior = np.setdiff1d(np.arange(mesh.n_nodes), bnd)
    if len(interior) == 0:
        raise InvalidArgument("mesh has no interior nodes")
    for a in (bnd, interior):
        a.setflags(write=False)
    return DiscreteOperator(mesh, K, B, interior, bnd, _boundary_mass(mesh), expression)


def element_matrices(mesh, expression, quad_order=2):
    """Local form and mass matrices per triangle, (nt, 3, 3) each."""
    return _local_matrices(mesh, expression, quad_order)


def solve_dirichlet_bvp(op, lam, g):
    """Discrete solution of ``(L - lam) u = 0`` with ``u = g`` on ``idx_boundary``."""
    g = np.asarray(g)
    if g.shape != (len(op.idx_boundary),):
        raise InvalidArgument(f"boundary data must have length {len(op.idx_boundary)}")
    blk = op.blocks()
    lam = complex(lam)
    dtype = np.result_type(op.K.dtype, g.dtype, complex if lam.imag else float)
    u = np.zeros(op.n, dtype=dtype)
    u[op.idx_boundary] = g
    if not np.any(g):
        op.factor(lam)  # well-posedness check still applies
        return u
    rhs = -(blk["Kib"] @ g - (lam if lam.imag else lam.real) * (blk["Bib"] @ g))
    u[op.idx_interior] = op.factor(lam).solve(rhs)
    return u


def conormal_trace(op, u, lam, load=None):
    """Variational conormal derivative ``t_p = Phi(u, hat_p) - (Lu, hat_p)`` on boundary nodes.

    ``load`` is the functional standing for ``Lu``; it defaults to ``lam B u``.
    If ``u`` does not solve the interior equations the result is still the
    boundary part of the residual ``K u - load``.
    """
    u = np.asarray(u)
    if u.shape != (op.n,):
        raise InvalidArgument(f"field must have length {op.n}")
    if load is None:
        load = lam * (op.B @ u)
    r = op.K @ u - load
    return r[op.idx_boundary]


def green_identity_residual(op, u, v, lam, mu):
    """Absolute defect of the discrete second Green identity.

    With ``Lu = K u - E_b t_u`` (the functional consistent with the first Green
    identity), checks ``(Lu, v) - (u, Lv) = <u, d v> - <d u, v>``.
    """
    b = op.idx_boundary
    tu = conormal_trace(op, u, lam)
    tv = conormal_trace(op, v, mu)
    Lu = op.K @ u
    Lu[b] -= tu
    Lv = op.K @ v
    Lv[b] -= tv
    lhs = np.vdot(v, Lu) - np.vdot(Lv, u)
    rhs = np.vdot(tv, u[b]) - np.vdot(v[b], tu)
    return abs(lhs - rhs)
