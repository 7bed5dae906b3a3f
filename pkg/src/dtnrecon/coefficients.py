"""Coefficient fields of the elliptic expression and the gauge (flow pull-back) construction.

The expression is::

    L = -sum_jk d_j a_jk d_k + sum_j (a_j d_j - d_j conj(a_j)) + a

with ``A = (a_jk)`` Hermitian, drift ``b = (a_j)`` and real potential ``c = a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import expr as _expr
from .errors import EllipticityError, GaugeError, InvalidArgument
from .quadrature import quadrature_points

HERMITIAN_TOL = 1e-12


class CoefficientField:
    """Scalar field evaluated pointwise; ``field(x, y)`` broadcasts over arrays."""

    def __call__(self, x, y):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantField(CoefficientField):
    value: complex

    def __call__(self, x, y):
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        return np.full(shape, self.value)

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class ExpressionField(CoefficientField):
    text: str
    tree: _expr.Node = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tree", _expr.parse(self.text))

    def __call__(self, x, y):
        return self.tree(x, y)

    def __str__(self):
        return self.text


@dataclass(frozen=True)
class ComplexField(CoefficientField):
    real: CoefficientField
    imag: CoefficientField

    def __call__(self, x, y):
        return self.real(x, y) + 1j * self.imag(x, y)


def as_field(value):
    """Coerce a number, expression string or ``[re, im]`` pair to a field."""
    if isinstance(value, CoefficientField):
        return value
    if isinstance(value, str):
        return ExpressionField(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return ComplexField(as_field(value[0]), as_field(value[1]))
    if isinstance(value, (int, float, complex, np.number)):
        return ConstantField(value)
    raise InvalidArgument(f"cannot interpret {value!r} as a coefficient field")


class CoefficientSample(NamedTuple):
    A: np.ndarray  # (m, 2, 2)
    b: np.ndarray  # (m, 2)
    c: np.ndarray  # (m,)


@dataclass(frozen=True)
class EllipticExpression:
    """Coefficients ``A`` (2x2 fields), ``b`` (2 fields), ``c`` and a claimed ellipticity constant.

    ``ellipticity_constant`` may be None when unknown (e.g. for pull-backs).
    """

    A: tuple
    b: tuple = (ConstantField(0.0), ConstantField(0.0))
    c: CoefficientField = ConstantField(0.0)
    ellipticity_constant: float | None = None
    name: str = "custom"

    def __post_init__(self):
        A = tuple(tuple(as_field(v) for v in row) for row in self.A)
        if len(A) != 2 or any(len(r) != 2 for r in A):
            raise InvalidArgument("A must be a 2x2 array of fields")
        b = tuple(as_field(v) for v in self.b)
        if len(b) != 2:
            raise InvalidArgument("b must have two components")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", as_field(self.c))

    def sample(self, points):
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        x, y = points[:, 0], points[:, 1]
        A = np.stack([np.stack([np.asarray(self.A[j][k](x, y)) for k in range(2)], -1) for j in range(2)], -2)
        b = np.stack([np.asarray(self.b[j](x, y)) for j in range(2)], -1)
        c = np.asarray(self.c(x, y))
        return CoefficientSample(A, b, c)


def rotation(theta):
    s, c = math.sin(theta), math.cos(theta)
    return np.array([[c, -s], [s, c]])


def laplace():
    return EllipticExpression(((1.0, 0.0), (0.0, 1.0)), ellipticity_constant=1.0, name="laplace")


def aniso_rot(theta=math.pi / 6):
    """Constant ``R(theta) diag(2, 1/2) R(theta)^T``."""
    R = rotation(theta)
    M = R @ np.diag([2.0, 0.5]) @ R.T
    M = 0.5 * (M + M.T)
    return EllipticExpression(tuple(tuple(float(v) for v in row) for row in M),
                              ellipticity_constant=0.5, name="aniso-rot")


def check_sample(sample, points, declared=None):
    """Validate Hermiticity, realness of ``c`` and ellipticity; return the minimal eigenvalue."""
    A, c = sample.A, sample.c
    scale = max(1.0, float(np.abs(A).max()))
    herm = np.abs(A - np.conj(np.swapaxes(A, -1, -2))).max(axis=(-1, -2))
    if np.any(herm > HERMITIAN_TOL * scale):
        k = int(np.argmax(herm))
        raise EllipticityError("coefficient matrix A is not Hermitian", points[k])
    cim = np.abs(np.imag(c))
    if np.any(cim > HERMITIAN_TOL * max(1.0, float(np.abs(c).max()))):
        raise EllipticityError("potential c is not real", points[int(np.argmax(cim))])
    re = np.real(A)
    lam_min = np.linalg.eigvalsh(0.5 * (re + np.swapaxes(re, -1, -2)))[:, 0]
    k = int(np.argmin(lam_min))
    if lam_min[k] <= 0:
        raise EllipticityError(f"ellipticity violated (smallest eigenvalue {lam_min[k]:.3e})", points[k])
    if declared is not None and lam_min[k] < declared * (1 - 1e-12):
        raise EllipticityError(
            f"smallest eigenvalue {lam_min[k]:.6g} below declared ellipticity constant {declared:.6g}", points[k])
    return float(lam_min[k])


def check_ellipticity(expression, mesh, quad_order=2):
    """Estimated ellipticity constant: min over quadrature points of the smallest eigenvalue of Re A."""
    pts, _, _ = quadrature_points(mesh, quad_order)
    pts = pts.reshape(-1, 2)
    return check_sample(expression.sample(pts), pts, expression.ellipticity_constant)


# -- gauge pair ---------------------------------------------------------------------------


def _bump(s):
    return s**2 * (1 - s) ** 2, 2 * s * (1 - s) * (1 - 2 * s), 2 * (1 - 6 * s + 6 * s**2)


@dataclass(frozen=True, eq=False)
class FlowMap:
    """Time-1 flow of the divergence-free field (d_y psi, -d_x psi).

    ``psi = eps x^2 (1-x)^2 y^2 (1-y)^2`` vanishes to second order on the
    boundary of the unit square, so the flow fixes the boundary pointwise and
    preserves area.  Integrated with ``n_steps`` classical RK4 steps.
    """

    eps: float
    n_steps: int = 64
    _cache: dict = field(default_factory=dict, repr=False)

    def velocity(self, p):
        fx, dfx, _ = _bump(p[..., 0])
        fy, dfy, _ = _bump(p[..., 1])
        return self.eps * np.stack([fx * dfy, -dfx * fy], -1)

    def velocity_jacobian(self, p):
        fx, dfx, ddfx = _bump(p[..., 0])
        fy, dfy, ddfy = _bump(p[..., 1])
        pxy = dfx * dfy
        row0 = np.stack([pxy, fx * ddfy], -1)
        row1 = np.stack([-ddfx * fy, -pxy], -1)
        return self.eps * np.stack([row0, row1], -2)

    def _integrate(self, p, sign, with_jacobian):
        x = np.array(p, dtype=float).reshape(-1, 2)
        J = np.broadcast_to(np.eye(2), (len(x), 2, 2)).copy() if with_jacobian else None
        h = 1.0 / self.n_steps

        def rhs(x, J):
            v = sign * self.velocity(x)
            return v, (None if J is None else sign * self.velocity_jacobian(x) @ J)

        for _ in range(self.n_steps):
            k1, K1 = rhs(x, J)
            k2, K2 = rhs(x + 0.5 * h * k1, None if J is None else J + 0.5 * h * K1)
            k3, K3 = rhs(x + 0.5 * h * k2, None if J is None else J + 0.5 * h * K2)
            k4, K4 = rhs(x + h * k3, None if J is None else J + h * K3)
            x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if J is not None:
                J = J + h / 6 * (K1 + 2 * K2 + 2 * K3 + K4)
        return x, J

    def forward(self, p):
        return self._integrate(p, 1.0, False)[0]

    def inverse(self, p):
        """Reverse-time flow, approximating the inverse map."""
        return self._integrate(p, -1.0, False)[0]

    def jacobian(self, p):
        """DPsi at ``p`` from the variational equation."""
        return self._integrate(p, 1.0, True)[1]

    def pullback_data(self, points):
        """Preimages X = Psi^{-1}(points) and DPsi(X); the last call is cached."""
        points = np.ascontiguousarray(points, dtype=float).reshape(-1, 2)
        key = (points.shape, points.tobytes())
        hit = self._cache.get("last")
        if hit is not None and hit[0] == key:
            return hit[1]
        X = self.inverse(points)
        if np.any(X < -1e-12) or np.any(X > 1 + 1e-12):
            raise GaugeError("flow preimage leaves the unit square")
        J = self.jacobian(X)
        self._cache["last"] = (key, (X, J))
        return X, J


@dataclass(frozen=True)
class _PullbackField(CoefficientField):
    flow: FlowMap
    base: EllipticExpression
    kind: str
    index: tuple

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        shape = x.shape
        pts = np.stack([x.ravel(), y.ravel()], -1)
        X, J = self.flow.pullback_data(pts)
        s = self.base.sample(X)
        if self.kind == "A":
            val = (J @ s.A @ np.swapaxes(J, -1, -2))[:, self.index[0], self.index[1]]
        elif self.kind == "b":
            val = np.einsum("mij,mj->mi", J, s.b)[:, self.index[0]]
        else:
            val = s.c
        return val.reshape(shape)


def pullback(base, flow):
    """Coefficients (DPsi A DPsi^T, DPsi b, c) composed with Psi^{-1} (det DPsi = 1)."""
    A = tuple(tuple(_PullbackField(flow, base, "A", (j, k)) for k in range(2)) for j in range(2))
    b = tuple(_PullbackField(flow, base, "b", (j,)) for j in range(2))
    c = _PullbackField(flow, base, "c", ())
    return EllipticExpression(A, b, c, None, name=f"gauge({flow.eps:g})[{base.name}]")


def gauge_pair(base, eps, n_steps=64, det_tol=1e-6, n_check=21):
    """Return ``(base, pulled_back, flow)``: two coefficient sets with equal continuum DtN data.

    Checks on an ``n_check`` x ``n_check`` grid that the flow stays in the unit
    square, the round trip is the identity and ``det DPsi`` is 1 within ``det_tol``.
    """
    if not np.isfinite(eps):
        raise InvalidArgument(f"gauge amplitude must be finite, got {eps!r}")
    flow = FlowMap(float(eps), int(n_steps))
    g = np.linspace(0.0, 1.0, n_check)
    grid = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    check_sample(base.sample(grid), grid, base.ellipticity_constant)
    fwd, J = flow._integrate(grid, 1.0, True)
    back = flow.inverse(grid)
    for img in (fwd, back):
        if np.any(img < -1e-12) or np.any(img > 1 + 1e-12):
            raise GaugeError(f"flow with eps={eps} leaves the unit square")
    det_err = np.abs(np.linalg.det(J) - 1).max()
    if det_err > det_tol:
        raise GaugeError(f"Jacobian determinant deviates from 1 by {det_err:.3e} (eps={eps} too large)")
    trip = np.abs(flow.inverse(fwd) - grid).max()
    if trip > 1e3 * det_tol:
        raise GaugeError(f"flow round trip error {trip:.3e} (eps={eps} too large)")
    return base, pullback(base, flow), flow
