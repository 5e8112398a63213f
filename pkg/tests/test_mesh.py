import math

import numpy as np
import pytest

from l1control.errors import MeshError, NoFreeNodesError
from l1control.mesh import (coarse_to_fine_index, free_nodes, mesh_size, uniform_refine,
                            unit_square_mesh)


@pytest.mark.parametrize("m,nv,nt,nf", [(1, 4, 2, 0), (2, 9, 8, 1), (3, 16, 18, 4), (5, 36, 50, 16)])
def test_counts(m, nv, nt, nf):
    mesh = unit_square_mesh(m)
    assert mesh.n_vertices == nv
    assert mesh.n_triangles == nt
    assert mesh.n_free == nf


def test_mesh_size_examples():
    assert mesh_size(unit_square_mesh(1)) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert mesh_size(unit_square_mesh(4)) == pytest.approx(0.353553, abs=1e-6)
    assert mesh_size(unit_square_mesh(10)) == pytest.approx(math.sqrt(2) / 10, rel=1e-14)


@pytest.mark.parametrize("m", [1, 2, 3, 7, 16])
def test_geometric_invariants(m):
    mesh = unit_square_mesh(m)
    assert np.all(mesh.signed_areas() > 0)
    assert abs(mesh.areas().sum() - 1.0) <= 1e-12
    edges, counts = mesh.edges()
    assert mesh.n_vertices - len(edges) + mesh.n_triangles == 1
    bnd = mesh.boundary_mask[edges].all(axis=1)
    # an edge with both endpoints on the boundary lies on it, except the corner diagonals at m=1
    x = mesh.vertices[edges]
    on_side = np.zeros(len(edges), bool)
    for d in (0, 1):
        for v in (0.0, 1.0):
            on_side |= (x[:, 0, d] == v) & (x[:, 1, d] == v)
    assert np.all(counts[on_side] == 1)
    assert np.all(counts[~on_side] == 2)
    assert bnd[on_side].all()
    assert mesh.n_free == (m - 1) ** 2


def test_quasi_uniform_shape_ratios():
    mesh = unit_square_mesh(6)
    d, r = mesh.diameters(), mesh.inradii()
    assert np.ptp(d / r) < 1e-12
    assert np.ptp(mesh_size(mesh) / r) < 1e-12


def test_orientation_and_numbering():
    mesh = unit_square_mesh(2)
    assert np.allclose(mesh.vertices[3], [0.0, 0.5])
    assert mesh.triangles[0].tolist() == [0, 1, 4]
    assert mesh.triangles[1].tolist() == [0, 4, 3]


def test_refine():
    m1 = unit_square_mesh(1)
    r = uniform_refine(m1)
    assert r.m == 2 and r.n_vertices == 9
    m8 = uniform_refine(uniform_refine(unit_square_mesh(2)))
    assert m8.m == 8
    assert mesh_size(m8) == pytest.approx(math.sqrt(2) / 8, rel=1e-14)
    for m in (1, 3, 5):
        c = unit_square_mesh(m)
        f = uniform_refine(c)
        assert mesh_size(f) == mesh_size(c) / 2
        idx = coarse_to_fine_index(m, 2 * m)
        assert np.array_equal(f.vertices[idx], c.vertices)


def test_free_nodes():
    assert free_nodes(unit_square_mesh(2)).tolist() == [4]
    assert len(free_nodes(unit_square_mesh(3))) == 4
    with pytest.raises(NoFreeNodesError, match="no free nodes"):
        free_nodes(unit_square_mesh(1))


@pytest.mark.parametrize("bad", [0, -3, 2.5])
def test_invalid_m(bad):
    with pytest.raises(MeshError):
        unit_square_mesh(bad)


def test_coarse_to_fine_rejects_non_nested():
    with pytest.raises(MeshError):
        coarse_to_fine_index(3, 8)


def test_dump_roundtrip():
    mesh = unit_square_mesh(2)
    lines = mesh.dump().splitlines()
    assert lines[0].split() == ["2", "9", "8"]
    assert len(lines) == 1 + 9 + 8


def test_arrays_read_only():
    mesh = unit_square_mesh(2)
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 1.0
