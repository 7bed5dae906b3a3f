"""Symmetric Gaussian rules on the reference triangle (Dunavant, positive weights)."""

import numpy as np

from .errors import InvalidArgument


def _orbit3(a, w):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)], [w] * 3


def _rule(order):
    if order == 1:
        return [(1 / 3, 1 / 3, 1 / 3)], [1.0]
    if order == 2:
        return _orbit3(1 / 6, 1 / 3)
    if order in (3, 4):
        p1, w1 = _orbit3(0.445948490915965, 0.223381589678011)
        p2, w2 = _orbit3(0.091576213509771, 0.109951743655322)
        return p1 + p2, w1 + w2
    if order == 5:
        p1, w1 = _orbit3(0.470142064105115, 0.132394152788506)
        p2, w2 = _orbit3(0.101286507323456, 0.125939180544827)
        return [(1 / 3, 1 / 3, 1 / 3)] + p1 + p2, [0.225] + w1 + w2
    raise InvalidArgument(f"quadrature order must be in 1..5, got {order!r}")


def triangle_rule(order):
    """Barycentric points (nq, 3) and weights (nq,) summing to 1, exact to ``order``."""
    if int(order) != order:
        raise InvalidArgument(f"quadrature order must be an integer, got {order!r}")
    pts, w = _rule(int(order))
    return np.array(pts), np.array(w)


def quadrature_points(mesh, order):
    """Physical quadrature points (nt, nq, 2) and area-scaled weights (nt, nq)."""
    bary, w = triangle_rule(order)
    corners = mesh.nodes[mesh.triangles]
    pts = np.einsum("qk,tkd->tqd", bary, corners)
    return pts, mesh.signed_areas()[:, None] * w[None, :], bary
