import numpy as np
import pytest
from hypothesis import given, strategies as st

from dtnrecon.errors import InvalidArgument, MeshFormatError, MeshValidationError, ValidationError
from dtnrecon.mesh import (Mesh, generate_lshape, generate_unit_square, read_mesh, refine_uniform,
                           select_patch, validate, write_mesh)


@pytest.mark.parametrize("n, nv, nt, nb", [(1, 5, 4, 4), (2, 13, 16, 8), (5, 61, 100, 20)])
def test_square_counts(n, nv, nt, nb):
    m = generate_unit_square(n)
    assert (m.n_nodes, m.n_triangles, len(m.boundary_edges)) == (nv, nt, nb)
    assert np.all(m.signed_areas() > 0)
    assert m.area() == pytest.approx(1.0, rel=1e-14)


def test_square_labels():
    m = generate_unit_square(3)
    mids = m.nodes[m.boundary_edges].mean(axis=1)
    lab = m.boundary_labels
    assert np.allclose(mids[lab == 1, 1], 0) and np.allclose(mids[lab == 3, 1], 1)
    assert np.allclose(mids[lab == 2, 0], 1) and np.allclose(mids[lab == 4, 0], 0)


def test_square_is_symmetric_under_reflection():
    m = generate_unit_square(4)
    swapped = {tuple(p) for p in np.round(m.nodes[:, ::-1], 12)}
    assert swapped == {tuple(p) for p in np.round(m.nodes, 12)}


def test_lshape_counts_and_area():
    m = generate_lshape(2)
    assert m.area() == pytest.approx(0.75, rel=1e-14)
    # perimeter 4 at h = 1/2 (regression value of the generator)
    assert len(m.boundary_edges) == 8
    assert (m.n_nodes, m.n_triangles) == (11, 12)
    assert sorted(set(m.boundary_labels.tolist())) == [1, 2, 3, 4, 5, 6]
    validate(m)


@pytest.mark.parametrize("bad", [0, -1, 1.5])
def test_generator_rejects(bad):
    with pytest.raises(InvalidArgument):
        generate_unit_square(bad)


def test_lshape_rejects_odd():
    with pytest.raises(InvalidArgument):
        generate_lshape(3)


@given(st.integers(1, 6), st.sampled_from(["square", "lshape"]))
def test_generated_meshes_valid(n, kind):
    m = generate_unit_square(n) if kind == "square" else generate_lshape(2 * n)
    validate(m)
    assert np.all(m.signed_areas() > 0)


@given(st.integers(1, 4), st.sampled_from(["square", "lshape"]))
def test_roundtrip(n, kind):
    m = generate_unit_square(n) if kind == "square" else generate_lshape(2 * n)
    m = refine_uniform(m)
    back = read_mesh(write_mesh(m))
    assert back == m
    assert np.array_equal(back.nodes, m.nodes)


def test_roundtrip_rational_coordinates():
    m = refine_uniform(refine_uniform(generate_unit_square(3)))
    assert np.array_equal(read_mesh(write_mesh(m)).nodes, m.nodes)


def test_read_comments():
    text = "# a mesh\n" + write_mesh(generate_unit_square(1)).replace("\n", "\n# note\n", 2)
    assert read_mesh(text) == generate_unit_square(1)


def test_read_empty():
    with pytest.raises(MeshFormatError):
        read_mesh("")


def test_read_bad_index_names_line():
    text = write_mesh(generate_unit_square(1)).splitlines()
    # first triangle line follows the header and the 5 node lines
    text[6] = "0 1 99"
    with pytest.raises(ValidationError) as exc:
        read_mesh("\n".join(text))
    assert exc.value.lineno == 7
    assert "line 7" in str(exc.value)


@pytest.mark.parametrize("patch_line, err", [("4 4 4", MeshFormatError), ("5 4", MeshFormatError), ("x 4 4", MeshFormatError)])
def test_read_malformed_header(patch_line, err):
    body = write_mesh(generate_unit_square(1)).splitlines()
    body[0] = patch_line
    with pytest.raises(err):
        read_mesh("\n".join(body))


def test_nonconforming_rejected():
    nodes = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], float)
    tris = np.array([[0, 1, 2], [1, 3, 2]])
    # boundary list missing an edge
    edges = np.array([[0, 1], [1, 3], [3, 2]])
    with pytest.raises(MeshValidationError):
        validate(Mesh(nodes, tris, edges, np.ones(3, int)))


def test_clockwise_rejected():
    nodes = np.array([[0, 0], [1, 0], [0, 1]], float)
    with pytest.raises(MeshValidationError):
        validate(Mesh(nodes, np.array([[0, 2, 1]]), np.array([[0, 1], [1, 2], [2, 0]]), np.ones(3, int)))


@given(st.integers(1, 5))
def test_refine_bookkeeping(n):
    m = generate_unit_square(n)
    r = refine_uniform(m)
    edges = {tuple(sorted(e)) for t in m.triangles for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0]))}
    assert r.n_triangles == 4 * m.n_triangles
    assert r.n_nodes == m.n_nodes + len(edges)
    assert len(r.boundary_edges) == 2 * len(m.boundary_edges)
    assert abs(r.area() - m.area()) <= 1e-14 * m.area()
    for lab in set(m.boundary_labels.tolist()):
        assert np.sum(r.boundary_labels == lab) == 2 * np.sum(m.boundary_labels == lab)
    validate(r)


def test_select_patch_bottom():
    m = generate_unit_square(4)
    p = select_patch(m, {1})
    assert len(p.edge_indices) == 4
    assert len(p.interior_nodes) == 3
    x = m.nodes[p.interior_nodes]
    assert np.all((x[:, 0] > 0) & (x[:, 0] < 1)) and np.allclose(x[:, 1], 0)


def test_select_patch_all():
    m = generate_unit_square(4)
    p = select_patch(m, {1, 2, 3, 4})
    assert set(p.interior_nodes.tolist()) == set(m.boundary_nodes.tolist())


def test_select_patch_missing_label():
    with pytest.raises(InvalidArgument):
        select_patch(generate_unit_square(2), {9})


def test_mesh_is_immutable():
    m = generate_unit_square(2)
    with pytest.raises(ValueError):
        m.nodes[0, 0] = 3.0
