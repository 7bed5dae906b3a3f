import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dtnrecon.assembly import assemble
from dtnrecon.coefficients import aniso_rot, laplace
from dtnrecon.mesh import generate_lshape, generate_unit_square, select_patch
from dtnrecon.oracle import eigensolve

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("default")

COEFFS = {"laplace": laplace, "aniso-rot": aniso_rot}
MESHES = {"square": generate_unit_square, "lshape": generate_lshape}


@functools.lru_cache(maxsize=None)
def mesh(kind, n):
    return MESHES[kind](n)


@functools.lru_cache(maxsize=None)
def operator(kind, n, coeff="laplace"):
    return assemble(mesh(kind, n), COEFFS[coeff]())


@functools.lru_cache(maxsize=None)
def patch(kind, n, labels=(1,)):
    return select_patch(mesh(kind, n), labels)


@functools.lru_cache(maxsize=None)
def eigen(kind, n, coeff="laplace", count=20):
    return eigensolve(operator(kind, n, coeff), count=count)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def cvec(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
