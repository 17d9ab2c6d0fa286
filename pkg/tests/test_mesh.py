import numpy as np
import pytest

from stabfem.errors import InvalidArgumentError, InvalidMeshError, RegionUnresolvedError
from stabfem.mesh import (
    Mesh,
    build_faces,
    generate_structured,
    refine_family,
    refine_uniform,
    square,
    tag_region,
    whole_domain,
)

from conftest import jittered

M_RECT = (-0.25, 0.25, -0.25, 0.25)


def test_smallest_mesh(unit_pair):
    assert unit_pair.num_nodes == 4
    assert unit_pair.num_triangles == 2
    assert len(build_faces(unit_pair)) == 1


def test_two_by_two_counts():
    mesh = generate_structured(2, 2, (-1, 1, -1, 1))
    assert (mesh.num_nodes, mesh.num_triangles) == (9, 8)
    assert len(build_faces(mesh)) == 8


def test_node_count_128():
    assert generate_structured(128, 128, (-1, 1, -1, 1)).num_nodes == 16641


def test_vertex_numbering():
    mesh = generate_structured(3, 2, (0, 3, 0, 2))
    np.testing.assert_allclose(mesh.vertices[2 * 4 + 1], [1.0, 2.0])


@pytest.mark.parametrize("nx, ny, rect", [(0, 1, (0, 1, 0, 1)), (1, -2, (0, 1, 0, 1)), (2, 2, (0, 0, 0, 1)),
                                          (2, 2, (1, 0, 0, 1)), (1.5, 2, (0, 1, 0, 1))])
def test_generate_rejects_bad_input(nx, ny, rect):
    with pytest.raises(InvalidArgumentError):
        generate_structured(nx, ny, rect)


@pytest.mark.parametrize("n", [1, 3, 8, 17])
def test_mesh_invariants(n):
    mesh = generate_structured(n, n + 1, (-1, 2, 0.5, 1.5))
    assert np.all(mesh.areas > 0)
    assert abs(mesh.areas.sum() - 3.0) < 1e-12 * 3.0
    assert mesh.diameters.max() / mesh.diameters.min() <= 4.0
    assert len(mesh.boundary_nodes) == 2 * (n + 1) + 2 * n


def test_min_angle_constant_over_family():
    angles = [m.min_angle() for m in refine_family(4, 4, (-1, 1, -1, 1), 4)]
    np.testing.assert_allclose(angles, np.pi / 4, rtol=1e-12)


def test_face_geometry(unit_pair):
    faces = build_faces(unit_pair)
    assert faces.lengths[0] == pytest.approx(np.sqrt(2.0))
    n = faces.normals[0]
    assert abs(abs(n @ np.array([1.0, -1.0]) / np.sqrt(2.0)) - 1.0) < 1e-14


@pytest.mark.parametrize("mesh", [generate_structured(5, 3, (0, 1, 0, 1)), jittered(6, 6)])
def test_face_invariants(mesh):
    faces = build_faces(mesh)
    # each interior edge is shared by exactly two triangles
    adjacency = np.bincount(faces.elements.ravel(), minlength=mesh.num_triangles)
    assert adjacency.sum() == 2 * len(faces)
    for (k0, k1), (a, b) in zip(faces.elements, faces.nodes):
        assert {a, b} <= set(mesh.triangles[k0]) and {a, b} <= set(mesh.triangles[k1])
    np.testing.assert_allclose(np.linalg.norm(faces.normals, axis=1), 1.0, rtol=1e-14)
    # normals point from the first element towards the second
    c = mesh.centroids
    assert np.all(np.einsum("ij,ij->i", faces.normals, c[faces.elements[:, 1]] - c[faces.elements[:, 0]]) > 0)
    # Euler count: 3T = 2 F_int + F_bnd
    n_bnd = 3 * mesh.num_triangles - 2 * len(faces)
    assert n_bnd == len(mesh.boundary_nodes)


def test_faces_are_unique():
    faces = build_faces(generate_structured(7, 5))
    keys = {tuple(sorted(nodes)) for nodes in faces.nodes}
    assert len(keys) == len(faces)


def test_nonconforming_edge_rejected():
    base = generate_structured(1, 1)
    verts = np.vstack([base.vertices, [[0.5, -0.5]]])
    tris = np.vstack([base.triangles, [[0, 4, 1]]])
    # three triangles share the bottom edge
    tris = np.vstack([tris, [[0, 1, 3]]])
    mesh = Mesh(verts, tris, np.arange(5), (0.0, 1.0, -0.5, 1.0))
    with pytest.raises(InvalidMeshError):
        build_faces(mesh)


def test_hanging_node_rejected():
    # lower cell split at the midpoint of its top edge, upper cell not
    v = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 1], [0, 2], [1, 2]], dtype=float)
    t = np.array([[0, 1, 4], [0, 4, 2], [1, 3, 4], [2, 3, 6], [2, 6, 5]])
    mesh = Mesh(v, t, np.array([0, 1, 2, 3, 5, 6]), (0.0, 1.0, 0.0, 2.0))
    with pytest.raises(InvalidMeshError):
        build_faces(mesh)


def test_tag_full_domain():
    mesh = generate_structured(6, 6, (-1, 1, -1, 1))
    tag = tag_region(mesh, (-1, 1, -1, 1))
    assert tag.mask.all()
    assert whole_domain(mesh).mask.all()


def test_tag_measurement_square():
    mesh = generate_structured(16, 16, (-1, 1, -1, 1))
    tag = tag_region(mesh, M_RECT, "M")
    assert tag.mask.sum() == 2 * 4 * 4
    assert tag.area(mesh) == pytest.approx(0.25)
    c = mesh.centroids[tag.mask]
    assert np.all(np.abs(c) < 0.25)


def test_tag_misaligned_rejected():
    mesh = generate_structured(10, 10, (-1, 1, -1, 1))
    with pytest.raises(RegionUnresolvedError):
        tag_region(mesh, M_RECT)


def test_tag_empty_region():
    mesh = generate_structured(4, 4, (0, 1, 0, 1))
    assert tag_region(mesh, (0.25, 0.25, 0, 1)).empty


@pytest.mark.parametrize("base", [8, 16, 24])
def test_region_alignment_across_levels(base):
    for mesh in refine_family(base, base, (-1, 1, -1, 1), 3):
        assert tag_region(mesh, M_RECT).area(mesh) == pytest.approx(0.25)


def test_refine_family():
    family = refine_family(16, 16, (-1, 1, -1, 1), 3)
    assert [m.shape[0] for m in family] == [16, 32, 64]
    hs = [m.h_global for m in family]
    np.testing.assert_allclose(np.array(hs[:-1]) / np.array(hs[1:]), 2.0, rtol=1e-12)
    with pytest.raises(InvalidArgumentError):
        refine_family(4, 4, (0, 1, 0, 1), 0)


def test_refine_uniform_midpoints():
    mesh = jittered(3, 3)
    fine, parents = refine_uniform(mesh)
    assert fine.num_triangles == 4 * mesh.num_triangles
    np.testing.assert_allclose(fine.vertices[mesh.num_nodes:], mesh.vertices[parents].mean(axis=1))
    assert np.all(fine.areas > 0)
    assert fine.areas.sum() == pytest.approx(mesh.areas.sum())
    build_faces(fine)


def test_export_text(tmp_path):
    mesh = generate_structured(2, 1)
    path = tmp_path / "mesh.txt"
    mesh.export_text(path)
    lines = path.read_text().splitlines()
    assert sum(line.startswith("v ") for line in lines) == 6
    assert lines[6] == "t 0 1 4"


def test_square():
    assert square((0.0, 0.0), 0.25) == M_RECT


def test_mesh_arrays_are_read_only():
    mesh = generate_structured(2, 2)
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 1.0
