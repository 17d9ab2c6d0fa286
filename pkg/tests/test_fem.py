import math

import numpy as np
import pytest
import scipy.sparse as sp

from stabfem import analysis, fem
from stabfem.bench import oracles
from stabfem.errors import InvalidArgumentError
from stabfem.fem import V, V0, DofMap, FieldP1
from stabfem.mesh import Mesh, build_faces, generate_structured, refine_family, tag_region


@pytest.fixture
def reference():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return Mesh(v, np.array([[0, 1, 2]]), np.arange(3), (0.0, 1.0, 0.0, 1.0))


def _monomial_exact(a, b):
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("rule", [fem.midpoint_rule()] + [fem.collapsed_gauss(n) for n in (2, 3, 4, 5)])
def test_quadrature_exactness(rule):
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-15)
    pts = rule.points[:, 1:]
    for a in range(rule.degree + 1):
        for b in range(rule.degree + 1 - a):
            approx = 0.5 * np.sum(rule.weights * pts[:, 0] ** a * pts[:, 1] ** b)
            assert abs(approx - _monomial_exact(a, b)) < 1e-14


def test_data_rule_degree():
    assert fem.DATA_RULE.degree >= 6
    assert fem.MASS_RULE.degree >= 2


def test_reference_mass(reference):
    m = fem.mass_matrix(reference).toarray()
    np.testing.assert_allclose(m, np.full((3, 3), 1 / 24) + np.eye(3) / 24, rtol=1e-15)


def test_reference_stiffness(reference):
    a = fem.stiffness_matrix(reference).toarray()
    np.testing.assert_allclose(a, [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]], atol=1e-15)


def test_mass_region_properties():
    mesh = generate_structured(8, 8, (-1, 1, -1, 1))
    region = tag_region(mesh, (-0.5, 0.5, -0.5, 0.5))
    m = fem.mass_matrix(mesh, region)
    one = np.ones(mesh.num_nodes)
    assert one @ m @ one == pytest.approx(1.0)
    # nodes that do not touch the region have empty rows
    touching = np.unique(mesh.triangles[region.mask])
    far = np.setdiff1d(np.arange(mesh.num_nodes), touching)
    assert abs(m[far]).sum() == 0.0
    assert np.linalg.eigvalsh(m.toarray()).min() > -1e-15
    assert np.linalg.eigvalsh(fem.mass_matrix(mesh).toarray()).min() > 0


def test_mass_empty_region():
    mesh = generate_structured(4, 4)
    empty = tag_region(mesh, (0.5, 0.5, 0.0, 1.0))
    assert fem.mass_matrix(mesh, empty).nnz == 0


def test_mass_rejects_foreign_region():
    region = tag_region(generate_structured(2, 2), (0, 1, 0, 1))
    with pytest.raises(InvalidArgumentError):
        fem.mass_matrix(generate_structured(4, 4), region)


def test_stiffness_kernel_and_energy():
    mesh = generate_structured(5, 7)
    a = fem.stiffness_matrix(mesh)
    assert np.max(np.abs(a @ np.ones(mesh.num_nodes))) < 1e-13
    u = mesh.vertices[:, 0]
    assert u @ a @ u == pytest.approx(1.0, rel=1e-13)
    assert abs(a - a.T).max() < 1e-15


def test_jump_hand_value(unit_pair):
    s1 = fem.jump_stabilization(unit_pair, build_faces(unit_pair), 1, 1.0)
    # values 0, 1, 1, 0 at (0,0), (1,0), (0,1), (1,1)
    u = np.array([0.0, 1.0, 1.0, 0.0])
    assert u @ s1 @ u == pytest.approx(16.0, rel=1e-14)


@pytest.mark.parametrize("power", [1, 3, 5])
def test_jump_affine_kernel_and_scaling(power, small_mesh):
    faces = build_faces(small_mesh)
    s = fem.jump_stabilization(small_mesh, faces, power, 1.0)
    x, y = small_mesh.vertices.T
    for u in (np.ones_like(x), x, 2 * x - 3 * y + 0.5):
        assert abs(u @ s @ u) < 1e-20 + 1e-12 * np.abs(s).sum()
    s2 = fem.jump_stabilization(small_mesh, faces, power, 2.0)
    np.testing.assert_allclose(s2.toarray(), 2 * s.toarray(), rtol=1e-15)
    assert abs(s - s.T).max() <= 1e-15 * abs(s).max()


def test_jump_rejects_bad_arguments(unit_pair):
    faces = build_faces(unit_pair)
    with pytest.raises(InvalidArgumentError):
        fem.jump_stabilization(unit_pair, faces, 2)
    with pytest.raises(InvalidArgumentError):
        fem.jump_stabilization(unit_pair, faces, 1, -1.0)


def test_matrices_match_brute_force(small_mesh):
    assert small_mesh.num_nodes <= 50
    faces = build_faces(small_mesh)
    np.testing.assert_allclose(fem.mass_matrix(small_mesh).toarray(), oracles.dense_mass(small_mesh),
                               atol=1e-12, rtol=0)
    np.testing.assert_allclose(fem.stiffness_matrix(small_mesh).toarray(), oracles.dense_stiffness(small_mesh),
                               atol=1e-12, rtol=0)
    for i in (1, 3, 5):
        np.testing.assert_allclose(fem.jump_stabilization(small_mesh, faces, i).toarray(),
                                   oracles.dense_jump(small_mesh, i), atol=1e-12, rtol=0)


def test_load_vector_constant():
    mesh = generate_structured(6, 4, (-1, 2, 0, 1))
    assert fem.load_vector(mesh, lambda x, y: 1.0).sum() == pytest.approx(3.0, rel=1e-14)


def test_load_vector_of_hat_is_mass_column(small_mesh):
    k = 12
    hat = fem.FieldP1(np.eye(small_mesh.num_nodes)[k], DofMap.from_mesh(small_mesh))
    pts_mass = fem.mass_matrix(small_mesh)

    def f(x, y):
        # evaluate the hat by locating the containing triangle through barycentrics
        out = np.zeros_like(x)
        for t, tri in enumerate(small_mesh.triangles):
            p = small_mesh.vertices[tri]
            T = np.column_stack([p[1] - p[0], p[2] - p[0]])
            lam = np.linalg.solve(T, np.stack([x - p[0, 0], y - p[0, 1]]).reshape(2, -1)).reshape((2,) + x.shape)
            bary = np.stack([1 - lam[0] - lam[1], lam[0], lam[1]])
            inside = np.all(bary >= -1e-12, axis=0)
            out = np.where(inside, bary.transpose(*range(1, bary.ndim), 0) @ hat.nodal[tri], out)
        return out

    np.testing.assert_allclose(fem.load_vector(small_mesh, f), pts_mass[:, k].toarray().ravel(), atol=1e-14)


def test_load_vector_degree6_against_closed_form(reference):
    # f = x^4 y^2 with x, y the barycentrics of vertices 1, 2;
    # the integral of x^a y^b (1 - x - y)^c is a! b! c! / (a + b + c + 2)!
    def dirichlet(a, b, c):
        return math.factorial(a) * math.factorial(b) * math.factorial(c) / math.factorial(a + b + c + 2)

    expected = [dirichlet(4, 2, 1), dirichlet(5, 2, 0), dirichlet(4, 3, 0)]
    got = fem.load_vector(reference, lambda x, y: x**4 * y**2)
    np.testing.assert_allclose(got, expected, rtol=1e-12)


def test_load_vector_matches_dense_oracle(small_mesh):
    f = lambda x, y: (1 + x) ** 3 * y**2 - x * y**4  # noqa: E731
    np.testing.assert_allclose(fem.load_vector(small_mesh, f), oracles.dense_load(small_mesh, f), atol=1e-12)


def test_interpolate_affine_and_data():
    mesh = generate_structured(4, 4, (-1, 1, -1, 1))
    g = fem.interpolate(mesh, lambda x, y: 2 * x - y + 1)
    assert analysis.l2_error(mesh, g, lambda x, y: 2 * x - y + 1) < 1e-14
    u0 = fem.interpolate(mesh, lambda x, y: (x + 1) ** 2 * (x - 1) * (y + 1) * (y - 1) ** 2)
    centre = np.flatnonzero(np.all(mesh.vertices == 0.0, axis=1))[0]
    assert u0.values[centre] == pytest.approx(-1.0)


def test_interpolation_rate_two():
    g = lambda x, y: np.sin(np.pi * x) * np.exp(y)  # noqa: E731
    errs, hs = [], []
    for mesh in refine_family(4, 4, (0, 1, 0, 1), 4):
        errs.append(analysis.l2_error(mesh, fem.interpolate(mesh, g), g))
        hs.append(mesh.h_global)
    assert analysis.fitted_slope(hs[-2:], errs[-2:]) == pytest.approx(2.0, abs=0.05)


def test_l2_project_identity_and_orthogonality(small_mesh):
    dm = DofMap.from_mesh(small_mesh)
    v = np.random.default_rng(1).standard_normal(small_mesh.num_nodes)
    np.testing.assert_allclose(fem.l2_project(small_mesh, FieldP1(v, dm)).values, v, rtol=1e-9, atol=1e-12)
    g = lambda x, y: np.exp(x) * y  # noqa: E731
    proj = fem.l2_project(small_mesh, g, V0, dm)
    residual = fem.load_vector(small_mesh, g) - fem.mass_matrix(small_mesh) @ proj.nodal
    assert np.max(np.abs(fem.restrict(residual, dm))) < 1e-10 * np.abs(fem.load_vector(small_mesh, g)).max()
    assert not np.any(proj.nodal[dm.boundary])


def test_l2_project_v0_of_one_improves():
    errs = []
    for n in (4, 8, 16):
        mesh = generate_structured(n, n)
        p = fem.l2_project(mesh, lambda x, y: 1.0, V0)
        errs.append(analysis.l2_error(mesh, p, lambda x, y: 1.0))
    assert errs[0] > errs[1] > errs[2]


def test_l2_project_rejects_unknown_space(small_mesh):
    with pytest.raises(InvalidArgumentError):
        fem.l2_project(small_mesh, lambda x, y: x, "W")


def test_dofmap_counts():
    mesh = generate_structured(2, 2)
    dm = DofMap.from_mesh(mesh)
    assert (dm.num_nodes, dm.num_interior) == (9, 1)
    assert dm.interior.tolist() == [4]
    mesh = generate_structured(5, 3)
    dm = DofMap.from_mesh(mesh)
    np.testing.assert_array_equal(np.sort(dm.to_interior[dm.interior]), np.arange(dm.num_interior))
    assert np.all(dm.to_interior[dm.boundary] == -1)


def test_restrict_and_prolong(small_mesh):
    dm = DofMap.from_mesh(small_mesh)
    v = np.arange(small_mesh.num_nodes, dtype=float)
    r = fem.restrict(v, dm)
    full = dm.prolong(r)
    np.testing.assert_array_equal(full[dm.interior], v[dm.interior])
    assert not np.any(full[dm.boundary])
    a = fem.stiffness_matrix(small_mesh)
    assert fem.restrict(a, dm, "rows").shape == (dm.num_interior, dm.num_nodes)
    assert fem.restrict(a, dm, "cols").shape == (dm.num_nodes, dm.num_interior)
    assert np.linalg.eigvalsh(fem.restrict(a, dm).toarray()).min() > 0
    with pytest.raises(InvalidArgumentError):
        fem.restrict(np.ones(3), dm)
    with pytest.raises(InvalidArgumentError):
        fem.restrict(sp.identity(3), dm)
    with pytest.raises(InvalidArgumentError):
        fem.restrict(a, dm, "diagonal")


def test_field_length_checked():
    dm = DofMap.from_mesh(generate_structured(2, 2))
    with pytest.raises(InvalidArgumentError):
        FieldP1(np.zeros(9), dm, V0)
    f = FieldP1(np.ones(1), dm, V0)
    assert f.nodal[4] == 1.0 and f.nodal.sum() == 1.0
    assert (2 * f).values[0] == 2.0
    assert (f - f).space == V


def test_poisson_sanity_rates():
    u = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)  # noqa: E731
    grad = lambda x, y: (np.pi * np.cos(np.pi * x) * np.sin(np.pi * y),  # noqa: E731
                         np.pi * np.sin(np.pi * x) * np.cos(np.pi * y))
    l2, h1, hs = [], [], []
    for mesh in refine_family(8, 8, (0, 1, 0, 1), 3):
        uh = fem.solve_poisson(mesh, lambda x, y: 2 * np.pi**2 * u(x, y))
        l2.append(analysis.l2_error(mesh, uh, u))
        h1.append(analysis.h1_seminorm_error(mesh, uh, grad))
        hs.append(mesh.h_global)
    assert analysis.fitted_slope(hs, h1) == pytest.approx(1.0, abs=0.1)
    assert analysis.fitted_slope(hs, l2) == pytest.approx(2.0, abs=0.1)
