"""Partial Dirichlet-to-Neumann map on a boundary patch, the Poisson operator and its adjoint.

All boundary quantities are coefficient vectors over the patch-interior
boundary nodes (the trace basis).  A DtN matrix stores duality pairings,
``N[p, q] = (M(lam) phi_q, phi_p)``; no boundary mass matrix is ever inverted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import conormal_trace, solve_dirichlet_bvp
from .errors import InvalidArgument
from .oracle import resolvent_apply


@dataclass(frozen=True)
class TraceBasis:
    """Hat functions of the patch-interior boundary nodes."""

    nodes: np.ndarray
    positions: np.ndarray  # positions within op.idx_boundary

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class DtNMatrix:
    lam: complex
    N: np.ndarray
    basis: TraceBasis

    def pair(self, phi, psi):
        """``(M(lam) phi, psi)``."""
        return np.vdot(psi, self.N @ phi)


def trace_basis(op, patch):
    return TraceBasis(np.asarray(patch.interior_nodes), op.boundary_position(patch.interior_nodes))


def _boundary_data(op, basis, phi):
    phi = np.asarray(phi)
    if phi.shape != (len(basis),):
        raise InvalidArgument(f"trace coefficients must have length {len(basis)}")
    g = np.zeros(len(op.idx_boundary), dtype=np.result_type(phi.dtype, float))
    g[basis.positions] = phi
    return g


def dtn_matrix(op, lam, patch):
    """Schur complement of ``K - lam B`` onto the patch-interior boundary nodes."""
    basis = trace_basis(op, patch)
    lam = complex(lam)
    s = lam if lam.imag else lam.real
    blk = op.blocks()
    P = basis.positions
    fac = op.factor(lam)
    Cip = (blk["Kib"][:, P] - s * blk["Bib"][:, P]).toarray()
    X = fac.solve(Cip)
    Cpi = blk["Kbi"][P] - s * blk["Bbi"][P]
    Cpp = (blk["Kbb"][P][:, P] - s * blk["Bbb"][P][:, P]).toarray()
    N = Cpp - Cpi @ X
    return DtNMatrix(lam, np.asarray(N), basis)


def poisson_apply(op, lam, phi, patch):
    """``gamma(lam) phi``: solution with boundary data ``phi`` on the patch and 0 elsewhere."""
    basis = trace_basis(op, patch)
    return solve_dirichlet_bvp(op, lam, _boundary_data(op, basis, phi))


def poisson_adjoint(op, lam, f, patch):
    """``gamma(lam)' f = -d_L((A - conj lam)^{-1} f)`` restricted to the patch.

    The Neumann trace of ``w = (A - conj lam)^{-1} f`` uses the load
    ``B (conj(lam) w + f)`` since ``L w = conj(lam) w + f``.
    """
    basis = trace_basis(op, patch)
    lb = np.conj(complex(lam))
    f = np.asarray(f)
    w = resolvent_apply(op, lb, f)
    s = lb if lb.imag else lb.real
    load = op.B @ (s * w + f)
    t = conormal_trace(op, w, s, load)
    return -t[basis.positions]


def patch_conormal(op, u, lam, patch):
    """``d_L u|_omega`` of a field solving the interior equations at ``lam``."""
    basis = trace_basis(op, patch)
    return conormal_trace(op, u, lam)[basis.positions]


# -- identities -------------------------------------------------------------------------


def adjoint_pairing_residual(op, lam, phi, f, patch):
    """``|(gamma(lam) phi, f)_B - (phi, gamma(lam)' f)|``."""
    u = poisson_apply(op, lam, phi, patch)
    lhs = np.vdot(f, op.B @ u)
    rhs = np.vdot(poisson_adjoint(op, lam, f, patch), phi)
    return abs(lhs - rhs)


def resolvent_identity_residual(op, lam, mu, phi, patch):
    """Norm of ``gamma(lam) phi - gamma(mu) phi - (lam - mu)(A - lam)^{-1} gamma(mu) phi``."""
    gl = poisson_apply(op, lam, phi, patch)
    gm = poisson_apply(op, mu, phi, patch)
    d = gl - gm - (complex(lam) - complex(mu)) * resolvent_apply(op, lam, gm)
    return float(np.linalg.norm(d))


def bridge_residual(op, lam, mu, phi, psi, patch):
    """``|(conj mu - lam)(gamma(lam) phi, gamma(mu) psi) - (N(lam) phi, psi) + (phi, N(mu) psi)|``."""
    gl = poisson_apply(op, lam, phi, patch)
    gm = poisson_apply(op, mu, psi, patch)
    left = (np.conj(complex(mu)) - complex(lam)) * np.vdot(gm, op.B @ gl)
    Nl = dtn_matrix(op, lam, patch).N
    Nm = dtn_matrix(op, mu, patch).N
    right = np.vdot(psi, Nl @ phi) - np.conj(np.vdot(phi, Nm @ psi))
    return abs(left - right)


def holomorphy_check(op, patch, lam0, lam, phi, psi):
    """Defect of ``(M(lam) phi, psi) = (phi, M(lam0) psi)
    + (conj lam0 - lam)((I + (lam - lam0)(A - lam)^{-1}) gamma(lam0) phi, gamma(lam0) psi)``."""
    lam0, lam = complex(lam0), complex(lam)
    Nl = dtn_matrix(op, lam, patch).N
    N0 = dtn_matrix(op, lam0, patch).N
    g_phi = poisson_apply(op, lam0, phi, patch)
    g_psi = poisson_apply(op, lam0, psi, patch)
    shifted = g_phi + (lam - lam0) * resolvent_apply(op, lam, g_phi)
    lhs = np.vdot(psi, Nl @ phi)
    rhs = np.conj(np.vdot(phi, N0 @ psi)) + (np.conj(lam0) - lam) * np.vdot(g_psi, op.B @ shifted)
    return abs(lhs - rhs)


IDENTITY_LAMBDAS = (2j, -2j, 3 + 1j, 3 - 1j, 4 + 3j, 4 - 3j)


def identity_suite(op, patch, n_instances=5, seed=0):
    """Residuals of the Green identity and the four Poisson/DtN identities on seeded random inputs.

    Returns ``{name: [residual, ...]}`` with ``n_instances`` entries per identity.
    """
    from .assembly import green_identity_residual

    rng = np.random.default_rng(seed)
    m, n = len(patch), op.n
    lams = IDENTITY_LAMBDAS

    def cvec(k):
        return rng.standard_normal(k) + 1j * rng.standard_normal(k)

    def pick(exclude=()):
        choices = [v for v in lams if all(abs(v - e) > 1e-12 for e in exclude)]
        return choices[rng.integers(len(choices))]

    out = {name: [] for name in ("green", "adjoint", "resolvent", "bridge", "representation")}
    for _ in range(n_instances):
        lam = pick()
        mu = pick([lam])
        out["green"].append(float(green_identity_residual(op, cvec(n), cvec(n), lam, mu)))
        out["adjoint"].append(float(adjoint_pairing_residual(op, lam, cvec(m), cvec(n), patch)))
        out["resolvent"].append(resolvent_identity_residual(op, lam, mu, cvec(m), patch))
        mu_b = pick([np.conj(lam)])
        out["bridge"].append(float(bridge_residual(op, lam, mu_b, cvec(m), cvec(m), patch)))
        out["representation"].append(float(holomorphy_check(op, patch, mu, lam, cvec(m), cvec(m))))
    return out
