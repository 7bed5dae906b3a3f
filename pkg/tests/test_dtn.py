import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import cvec, eigen, operator, patch
from dtnrecon.assembly import conormal_trace, solve_dirichlet_bvp
from dtnrecon.dtn import (IDENTITY_LAMBDAS, adjoint_pairing_residual, bridge_residual, dtn_matrix,
                          holomorphy_check, identity_suite, patch_conormal, poisson_adjoint, poisson_apply,
                          resolvent_identity_residual, trace_basis)
from dtnrecon.errors import InvalidArgument, NearEigenvalueError

CASES = [("square", 8, "laplace"), ("square", 8, "aniso-rot"), ("lshape", 8, "laplace"), ("lshape", 8, "aniso-rot")]
lams = st.sampled_from(IDENTITY_LAMBDAS)
seeds = st.integers(0, 10**6)
cases = st.sampled_from(CASES)


def _setup(case):
    kind, n, coeff = case
    return operator(kind, n, coeff), patch(kind, n)


def test_trace_basis_excludes_corners():
    op, p = operator("square", 4), patch("square", 4)
    b = trace_basis(op, p)
    assert len(b) == 3
    assert np.array_equal(op.idx_boundary[b.positions], b.nodes)


def test_real_lambda_symmetric():
    op, p = operator("square", 16), patch("square", 16)
    N = dtn_matrix(op, 0.0, p).N
    assert np.abs(N - N.T).max() <= 1e-12 * np.abs(N).max()
    assert np.isrealobj(N)


@pytest.mark.parametrize("case", CASES)
def test_conjugate_symmetry(case):
    op, p = _setup(case)
    for lam in (2j, 3 + 1j, -1 - 4j, 10 + 0.5j, 0.1j):
        N1 = dtn_matrix(op, lam, p).N
        N2 = dtn_matrix(op, np.conj(lam), p).N
        assert np.abs(N2 - N1.conj().T).max() <= 1e-10 * np.abs(N1).max()


@pytest.mark.parametrize("case", CASES)
def test_schur_matches_solve_route(case):
    op, p = _setup(case)
    lam = 1.5 + 0.5j
    D = dtn_matrix(op, lam, p)
    rng = np.random.default_rng(0)
    for q in rng.choice(len(p), 3, replace=False):
        e = np.zeros(len(p))
        e[q] = 1
        g = np.zeros(len(op.idx_boundary), complex)
        g[D.basis.positions] = e
        t = conormal_trace(op, solve_dirichlet_bvp(op, lam, g), lam)
        assert np.abs(D.N[:, q] - t[D.basis.positions]).max() < 1e-10 * np.abs(D.N).max()


def test_pole_blowup_near_first_eigenvalue():
    op, p = operator("square", 16), patch("square", 16)
    lam1 = eigen("square", 16).eigenvalues[0]
    near = np.linalg.norm(dtn_matrix(op, lam1 + 1e-6, p).N)
    far = np.linalg.norm(dtn_matrix(op, lam1 + 1, p).N)
    assert near > 1e3 * far


def test_exact_eigenvalue_vetoed():
    op, p = operator("square", 16), patch("square", 16)
    lam1 = eigen("square", 16).eigenvalues[0]
    with pytest.raises(NearEigenvalueError):
        dtn_matrix(op, lam1, p)


def test_zero_data():
    op, p = operator("square", 8), patch("square", 8)
    D = dtn_matrix(op, 1j, p)
    assert not np.any(D.N @ np.zeros(len(p)))
    assert not np.any(poisson_apply(op, 1j, np.zeros(len(p)), p))
    assert not np.any(poisson_adjoint(op, 1j, np.zeros(op.n), p))


def test_trace_length_checked():
    op, p = operator("square", 8), patch("square", 8)
    with pytest.raises(InvalidArgument):
        poisson_apply(op, 1j, np.zeros(len(p) + 1), p)


def test_poisson_support():
    op, p = operator("square", 8), patch("square", 8)
    u = poisson_apply(op, 2j, np.ones(len(p)), p)
    b = np.zeros(len(op.idx_boundary), bool)
    b[trace_basis(op, p).positions] = True
    assert not np.any(u[op.idx_boundary][~b])
    assert np.allclose(u[op.idx_boundary][b], 1)


@given(cases, lams, seeds)
def test_adjoint_pairing(case, lam, seed):
    op, p = _setup(case)
    rng = np.random.default_rng(seed)
    assert adjoint_pairing_residual(op, lam, cvec(rng, len(p)), cvec(rng, op.n), p) < 1e-10


@given(cases, lams, lams, seeds)
def test_resolvent_identity(case, lam, mu, seed):
    op, p = _setup(case)
    assert resolvent_identity_residual(op, lam, mu, cvec(np.random.default_rng(seed), len(p)), p) < 1e-10


@given(cases, lams, lams, seeds)
def test_bridge(case, lam, mu, seed):
    if abs(lam - np.conj(mu)) < 1e-12:
        return
    op, p = _setup(case)
    rng = np.random.default_rng(seed)
    assert bridge_residual(op, lam, mu, cvec(rng, len(p)), cvec(rng, len(p)), p) < 1e-10


@given(cases, st.sampled_from([2j, -2j, 4 + 3j, 4 - 3j]), st.sampled_from([2j, -2j, 4 + 3j, 4 - 3j]), seeds)
def test_representation(case, lam0, lam, seed):
    op, p = _setup(case)
    rng = np.random.default_rng(seed)
    assert holomorphy_check(op, p, lam0, lam, cvec(rng, len(p)), cvec(rng, len(p))) < 1e-9


def test_representation_degenerate_and_homogeneous():
    op, p = _setup(CASES[1])
    rng = np.random.default_rng(9)
    phi, psi = cvec(rng, len(p)), cvec(rng, len(p))
    assert holomorphy_check(op, p, 2j, 2j, phi, psi) < 1e-10
    base = holomorphy_check(op, p, 2j, 4 - 3j, phi, psi)
    scaled = holomorphy_check(op, p, 2j, 4 - 3j, 1e3 * phi, psi)
    assert scaled <= 1e3 * max(base, 1e-16) * 10


def test_adjoint_on_eigenvector():
    op, p = operator("square", 16), patch("square", 16)
    pkg = eigen("square", 16)
    for k in (0, 1, 3):
        u, lk = pkg.eigenvectors[:, k], pkg.eigenvalues[k]
        tau = patch_conormal(op, u, lk, p)
        for mu in (2j, 3 - 1j):
            got = poisson_adjoint(op, mu, u, p)
            want = tau / (np.conj(mu) - lk)
            assert np.linalg.norm(got - want) < 1e-8 * np.linalg.norm(want)


def test_identity_suite_all_small():
    op, p = _setup(CASES[3])
    res = identity_suite(op, p, 4, seed=2)
    assert set(res) == {"green", "adjoint", "resolvent", "bridge", "representation"}
    assert all(len(v) == 4 and max(v) < 1e-9 for v in res.values())


def test_matrix_pairing():
    op, p = operator("square", 8), patch("square", 8)
    D = dtn_matrix(op, 1 + 1j, p)
    rng = np.random.default_rng(4)
    phi, psi = cvec(rng, len(p)), cvec(rng, len(p))
    assert D.pair(phi, psi) == pytest.approx(np.vdot(psi, D.N @ phi))
