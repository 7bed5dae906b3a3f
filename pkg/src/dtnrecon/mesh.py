"""Conforming triangulations of polygonal domains with labelled boundary edges."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, MeshFormatError, MeshValidationError


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """P1 triangulation.

    ``nodes`` is (nv, 2), ``triangles`` is (nt, 3) counterclockwise,
    ``boundary_edges`` is (nb, 2) and ``boundary_labels`` is (nb,).
    Arrays are read-only; construction validates all invariants.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_labels: np.ndarray
    _boundary_nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(self.nodes, float).reshape(-1, 2))
        object.__setattr__(self, "triangles", _frozen(self.triangles, np.int64).reshape(-1, 3))
        object.__setattr__(self, "boundary_edges", _frozen(self.boundary_edges, np.int64).reshape(-1, 2))
        object.__setattr__(self, "boundary_labels", _frozen(self.boundary_labels, np.int64).reshape(-1))
        validate(self)
        object.__setattr__(self, "_boundary_nodes", _frozen(np.unique(self.boundary_edges), np.int64))

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def boundary_nodes(self):
        """Sorted indices of nodes on the boundary."""
        return self._boundary_nodes

    @property
    def labels(self):
        return sorted(set(int(v) for v in self.boundary_labels))

    def signed_areas(self):
        return signed_areas(self.nodes, self.triangles)

    def area(self):
        return float(self.signed_areas().sum())

    def h(self):
        """Longest edge length."""
        e = _all_edges(self.triangles)
        d = self.nodes[e[:, 0]] - self.nodes[e[:, 1]]
        return float(np.sqrt((d**2).sum(1)).max())

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.boundary_edges, other.boundary_edges)
            and np.array_equal(self.boundary_labels, other.boundary_labels)
        )

    __hash__ = None


@dataclass(frozen=True)
class BoundaryPatch:
    """Union of labelled boundary edges standing for the patch omega.

    ``interior_nodes`` are the boundary nodes whose hat functions restricted
    to the boundary are supported inside the patch.
    """

    edge_indices: tuple
    interior_nodes: np.ndarray
    labels: tuple

    def __len__(self):
        return len(self.interior_nodes)


def signed_areas(nodes, triangles):
    p = nodes[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _all_edges(triangles):
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    return np.unique(np.sort(e, axis=1), axis=0)


def validate(mesh):
    """Raise :class:`MeshValidationError` unless every mesh invariant holds."""
    nv = len(mesh.nodes)
    t, be = mesh.triangles, mesh.boundary_edges
    if nv == 0 or len(t) == 0:
        raise MeshValidationError("mesh has no nodes or no triangles")
    if not np.all(np.isfinite(mesh.nodes)):
        raise MeshValidationError("non-finite node coordinates")
    for name, idx in (("triangle", t), ("boundary edge", be)):
        if idx.size and (idx.min() < 0 or idx.max() >= nv):
            bad = int(np.argmax((idx < 0).any(1) | (idx >= nv).any(1)))
            raise MeshValidationError(f"{name} {bad} references a node outside 0..{nv - 1}")
    if len(be) != len(mesh.boundary_labels):
        raise MeshValidationError("boundary label count differs from boundary edge count")
    if np.any(t[:, 0] == t[:, 1]) or np.any(t[:, 1] == t[:, 2]) or np.any(t[:, 0] == t[:, 2]):
        raise MeshValidationError("degenerate triangle with repeated node")
    areas = signed_areas(mesh.nodes, t)
    if np.any(areas <= 0):
        bad = int(np.argmax(areas <= 0))
        raise MeshValidationError(f"triangle {bad} has nonpositive signed area {areas[bad]:.3e}")

    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    counts = Counter(map(tuple, np.sort(edges, axis=1).tolist()))
    over = [e for e, c in counts.items() if c > 2]
    if over:
        raise MeshValidationError(f"edge {over[0]} is shared by more than two triangles")
    single = {e for e, c in counts.items() if c == 1}
    given = [tuple(sorted(e)) for e in be.tolist()]
    if len(set(given)) != len(given):
        raise MeshValidationError("duplicate boundary edge")
    for k, e in enumerate(given):
        if e not in single:
            raise MeshValidationError(f"boundary edge {k} {e} is not an edge of exactly one triangle")
    if len(single) != len(given):
        missing = sorted(single - set(given))[0]
        raise MeshValidationError(f"non-conforming or unlabelled boundary: edge {missing} has one triangle")
    deg = Counter(be.ravel().tolist())
    if any(c != 2 for c in deg.values()):
        node = next(n for n, c in deg.items() if c != 2)
        raise MeshValidationError(f"boundary is not a union of closed loops at node {node}")


def generate_unit_square(n):
    """Crisscross triangulation of [0,1]^2 with n cells per side.

    Each cell gets a centre node and four triangles, which keeps the mesh
    invariant under x <-> y.  Labels: 1 bottom, 2 right, 3 top, 4 left.
    """
    if int(n) != n or n < 1:
        raise InvalidArgument(f"subdivisions must be a positive integer, got {n!r}")
    n = int(n)
    return _crisscross(n, lambda i, j: True, _square_label)


def _square_label(mid):
    x, y = mid
    if y == 0.0:
        return 1
    if x == 1.0:
        return 2
    if y == 1.0:
        return 3
    return 4


def generate_lshape(n):
    """Crisscross triangulation of [0,1]^2 minus [1/2,1]^2; n cells per unit side, n even.

    Labels: 1 bottom, 2 right (x=1), 3 inner horizontal (y=1/2), 4 inner
    vertical (x=1/2), 5 top (y=1), 6 left.
    """
    if int(n) != n or n < 2 or int(n) % 2:
        raise InvalidArgument(f"L-shape subdivisions must be an even integer >= 2, got {n!r}")
    n = int(n)
    half = n // 2
    return _crisscross(n, lambda i, j: not (i >= half and j >= half), _lshape_label)


def _lshape_label(mid):
    x, y = mid
    if y == 0.0:
        return 1
    if x == 1.0:
        return 2
    if y == 0.5 and x > 0.5:
        return 3
    if x == 0.5 and y > 0.5:
        return 4
    if y == 1.0:
        return 5
    return 6


def _crisscross(n, keep_cell, label_of):
    h = 1.0 / n
    grid = {}
    nodes = []

    def gnode(i, j):
        key = (i, j)
        if key not in grid:
            grid[key] = len(nodes)
            nodes.append((i * h, j * h))
        return grid[key]

    cells = [(i, j) for j in range(n) for i in range(n) if keep_cell(i, j)]
    for i, j in cells:
        for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
            gnode(i + di, j + dj)
    tris = []
    for i, j in cells:
        c = len(nodes)
        nodes.append(((i + 0.5) * h, (j + 0.5) * h))
        p00, p10, p11, p01 = gnode(i, j), gnode(i + 1, j), gnode(i + 1, j + 1), gnode(i, j + 1)
        tris += [(p00, p10, c), (p10, p11, c), (p11, p01, c), (p01, p00, c)]
    nodes = np.array(nodes)
    tris = np.array(tris)
    edges, labels = _boundary_from_triangles(nodes, tris, label_of)
    return Mesh(nodes, tris, edges, labels)


def _boundary_from_triangles(nodes, tris, label_of):
    directed = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    counts = Counter(map(tuple, np.sort(directed, axis=1).tolist()))
    edges = [tuple(e) for e in directed.tolist() if counts[tuple(sorted(e))] == 1]
    edges.sort(key=lambda e: tuple(np.round(0.5 * (nodes[e[0]] + nodes[e[1]]), 12)[::-1]))
    labels = [label_of(tuple(0.5 * (nodes[a] + nodes[b]))) for a, b in edges]
    return np.array(edges, dtype=np.int64), np.array(labels, dtype=np.int64)


def refine_uniform(mesh):
    """Split every triangle into four congruent children via edge midpoints."""
    t = mesh.triangles
    nv = mesh.n_nodes
    edges = _all_edges(t)
    mid_index = {tuple(e): nv + k for k, e in enumerate(edges.tolist())}
    nodes = np.vstack([mesh.nodes, 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])])

    def m(a, b):
        return mid_index[(a, b) if a < b else (b, a)]

    children = []
    for a, b, c in t.tolist():
        ab, bc, ca = m(a, b), m(b, c), m(c, a)
        children += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    new_edges, new_labels = [], []
    for (a, b), lab in zip(mesh.boundary_edges.tolist(), mesh.boundary_labels.tolist()):
        mm = m(a, b)
        new_edges += [(a, mm), (mm, b)]
        new_labels += [lab, lab]
    return Mesh(nodes, np.array(children), np.array(new_edges), np.array(new_labels))


def select_patch(mesh, labels):
    """Boundary patch made of all edges carrying one of ``labels``."""
    wanted = {int(v) for v in labels}
    sel = np.flatnonzero(np.isin(mesh.boundary_labels, sorted(wanted)))
    if len(sel) == 0:
        raise InvalidArgument(f"no boundary edge carries a label in {sorted(wanted)}")
    inside = np.zeros(len(mesh.boundary_edges), bool)
    inside[sel] = True
    ok = {}
    for k, (a, b) in enumerate(mesh.boundary_edges.tolist()):
        for v in (a, b):
            ok[v] = ok.get(v, True) and bool(inside[k])
    interior = np.array(sorted(v for v, good in ok.items() if good), dtype=np.int64)
    if len(interior) == 0:
        raise InvalidArgument(f"patch {sorted(wanted)} contains no patch-interior node")
    interior.setflags(write=False)
    return BoundaryPatch(tuple(int(k) for k in sel), interior, tuple(sorted(wanted)))


def write_mesh(mesh):
    """Serialize to the ASCII mesh format (17 significant digits)."""
    lines = [f"{mesh.n_nodes} {mesh.n_triangles} {len(mesh.boundary_edges)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes.tolist()]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines += [f"{i} {j} {lab}" for (i, j), lab in zip(mesh.boundary_edges.tolist(), mesh.boundary_labels.tolist())]
    return "\n".join(lines) + "\n"


def read_mesh(text):
    """Parse the ASCII mesh format; errors name the offending line."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s and not s.startswith("#"):
            rows.append((lineno, s.split()))
    if not rows:
        raise MeshFormatError("empty mesh file")
    lineno, head = rows[0]
    if len(head) != 3:
        raise MeshFormatError("header must be 'nv nt nb'", lineno)
    try:
        nv, nt, nb = (int(v) for v in head)
    except ValueError:
        raise MeshFormatError("header counts must be integers", lineno) from None
    if min(nv, nt, nb) < 0:
        raise MeshFormatError("negative count in header", lineno)
    body = rows[1:]
    if len(body) != nv + nt + nb:
        where = body[-1][0] if body else lineno
        raise MeshFormatError(f"expected {nv + nt + nb} data lines, found {len(body)}", where)

    def take(chunk, width, conv, what):
        out = []
        for ln, parts in chunk:
            if len(parts) != width:
                raise MeshFormatError(f"{what} line needs {width} fields", ln)
            try:
                out.append([conv(p) for p in parts])
            except ValueError:
                raise MeshFormatError(f"bad number in {what} line", ln) from None
        return out

    nodes = take(body[:nv], 2, float, "node")
    tri_rows = body[nv:nv + nt]
    edge_rows = body[nv + nt:]
    tris = take(tri_rows, 3, int, "triangle")
    bnd = take(edge_rows, 3, int, "boundary edge")
    for rows_, vals, what in ((tri_rows, tris, "triangle"), (edge_rows, [r[:2] for r in bnd], "boundary edge")):
        for (ln, _), idx in zip(rows_, vals):
            if any(i < 0 or i >= nv for i in idx):
                raise MeshFormatError(f"{what} references node outside 0..{nv - 1}", ln)
    try:
        return Mesh(np.array(nodes).reshape(-1, 2), np.array(tris).reshape(-1, 3),
                    np.array([r[:2] for r in bnd]).reshape(-1, 2), np.array([r[2] for r in bnd]))
    except MeshValidationError as exc:
        line = _locate(str(exc), nv, tri_rows, edge_rows)
        raise MeshFormatError(str(exc), line) from None


def _locate(message, nv, tri_rows, edge_rows):
    import re

    m = re.match(r"(triangle|boundary edge) (\d+)", message)
    if m:
        rows = tri_rows if m.group(1) == "triangle" else edge_rows
        k = int(m.group(2))
        if k < len(rows):
            return rows[k][0]
    return 0
