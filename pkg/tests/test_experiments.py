import numpy as np
import pytest

from conftest import eigen, mesh, operator, patch
from dtnrecon.coefficients import laplace
from dtnrecon.errors import InvalidArgument
from dtnrecon.experiments import DENSITY_LAMBDAS, density_check, unique_continuation_check, uniqueness_experiment
from dtnrecon.mesh import select_patch
from dtnrecon.oracle import EigenPackage


def test_gauge_control_eps_zero():
    rep = uniqueness_experiment(mesh("square", 8), laplace(), 0.0, [0, 2j, -2j], [1], n_clusters=5)
    for lv in rep.levels:
        assert max(lv.dtn_discrepancy.values()) < 1e-12
        assert lv.eig_discrepancy < 1e-12


def test_gauge_small_mesh_decreases():
    rep = uniqueness_experiment(mesh("square", 8), laplace(), 0.05, [0, 2j], [1], n_clusters=5)
    assert len(rep.levels) == 2
    assert rep.levels[1].h == pytest.approx(rep.levels[0].h / 2)
    assert all(r > 2 for r in rep.dtn_ratios.values())
    assert 0 < rep.levels[0].eig_discrepancy < 5e-3


def test_ucp_full_boundary_is_one():
    m = mesh("square", 16)
    rep = unique_continuation_check(operator("square", 16), select_patch(m, [1, 2, 3, 4]), eigen("square", 16), 20)
    assert np.allclose(rep.ratios, 1.0)


def test_ucp_bottom_positive_and_basis_invariant():
    op, p, pkg = operator("square", 16), patch("square", 16), eigen("square", 16)
    rep = unique_continuation_check(op, p, pkg, 20)
    assert rep.min_ratio > 0.1
    # rotate and scale each cluster's eigenvectors; ratios must not change
    U = pkg.eigenvectors.copy()
    for c in pkg.clusters:
        c = list(c)
        if len(c) == 2:
            t = 0.7
            Q = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
            U[:, c] = U[:, c] @ Q
    U = U * -3.5
    other = EigenPackage(pkg.eigenvalues, U, pkg.clusters, pkg.cluster_tol)
    assert np.allclose(unique_continuation_check(op, p, other, 20).ratios, rep.ratios, rtol=1e-10)


def test_ucp_k_too_large():
    op, p, pkg = operator("square", 8), patch("square", 8), eigen("square", 8, count=3)
    with pytest.raises(InvalidArgument):
        unique_continuation_check(op, p, pkg, len(pkg.eigenvalues) + 1)


def test_density_monotone_and_small():
    op, p, pkg = operator("square", 16), patch("square", 16), eigen("square", 16)
    rep = density_check(op, p, DENSITY_LAMBDAS, pkg, 5)
    assert rep.sample_counts == (2, 4, 6, 8, 10)
    assert np.all(np.diff(rep.errors, axis=0) <= 1e-12)
    assert np.all(np.diff(rep.span_dims) >= 0)
    assert rep.errors[-1].max() < 5e-2


def test_density_empty():
    op, p, pkg = operator("square", 8), patch("square", 8), eigen("square", 8)
    rep = density_check(op, p, DENSITY_LAMBDAS[:4], pkg, 0)
    assert rep.errors.shape == (2, 0)


@pytest.mark.parametrize("lams", [[1.0, 1j, -1j], [1j, 2 - 1j], [1j]])
def test_density_sample_validation(lams):
    op, p, pkg = operator("square", 8), patch("square", 8), eigen("square", 8)
    with pytest.raises(InvalidArgument):
        density_check(op, p, lams, pkg, 2)
