"""P1 finite element spaces, quadrature and the assembled bilinear forms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import linalg
from .errors import InvalidArgumentError
from .mesh import FaceSet, Mesh, RegionTag

V = "V"    # continuous P1 on all nodes
V0 = "V0"  # continuous P1 vanishing on the boundary


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points (n, 3) and weights summing to one."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


def midpoint_rule() -> QuadratureRule:
    """Three interior points, exact for degree 2."""
    a, b = 2.0 / 3.0, 1.0 / 6.0
    pts = np.array([[a, b, b], [b, a, b], [b, b, a]])
    return QuadratureRule(pts, np.full(3, 1.0 / 3.0), 2)


def collapsed_gauss(n: int) -> QuadratureRule:
    """Conical product of Gauss-Legendre rules, exact for degree ``2n - 2``.

    Maps the unit square onto the triangle with the Duffy transform
    (s, t) -> (s, t (1 - s)).
    """
    g, w = np.polynomial.legendre.leggauss(n)
    g, w = 0.5 * (g + 1.0), 0.5 * w
    s, t = np.meshgrid(g, g, indexing="ij")
    ws, wt = np.meshgrid(w, w, indexing="ij")
    s, t = s.ravel(), t.ravel()
    lam1 = s
    lam2 = t * (1.0 - s)
    lam0 = 1.0 - lam1 - lam2
    weights = (ws * wt).ravel() * (1.0 - s) * 2.0
    return QuadratureRule(np.column_stack([lam0, lam1, lam2]), weights, 2 * n - 2)


MASS_RULE = midpoint_rule()
DATA_RULE = collapsed_gauss(5)  # degree 8: degree-6 data times a hat is exact


@dataclass(frozen=True)
class DofMap:
    """Node numbering for V_h and its homogeneous Dirichlet subspace."""

    num_nodes: int
    interior: np.ndarray
    boundary: np.ndarray
    to_interior: np.ndarray  # node -> interior index, -1 on the boundary

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "DofMap":
        n = mesh.num_nodes
        is_bnd = np.zeros(n, dtype=bool)
        is_bnd[mesh.boundary_nodes] = True
        interior = np.flatnonzero(~is_bnd)
        to_interior = np.full(n, -1, dtype=np.int64)
        to_interior[interior] = np.arange(len(interior))
        return cls(n, interior, np.flatnonzero(is_bnd), to_interior)

    @property
    def num_interior(self) -> int:
        return len(self.interior)

    def size(self, space: str) -> int:
        return self.num_nodes if space == V else self.num_interior

    def prolong(self, values: np.ndarray) -> np.ndarray:
        """Extend interior values by zero to all nodes."""
        values = np.asarray(values)
        if values.shape[0] != self.num_interior:
            raise InvalidArgumentError(f"expected {self.num_interior} interior values, got {values.shape[0]}")
        full = np.zeros((self.num_nodes,) + values.shape[1:])
        full[self.interior] = values
        return full


@dataclass(frozen=True, eq=False)
class FieldP1:
    """Coefficient vector of a P1 function in V_h or V_h^0."""

    values: np.ndarray
    dofmap: DofMap
    space: str = V

    def __post_init__(self):
        if self.space not in (V, V0):
            raise InvalidArgumentError(f"unknown space {self.space!r}")
        if len(self.values) != self.dofmap.size(self.space):
            raise InvalidArgumentError(
                f"{len(self.values)} coefficients for space {self.space} of size {self.dofmap.size(self.space)}"
            )

    @property
    def nodal(self) -> np.ndarray:
        """Values at every mesh node."""
        return self.values if self.space == V else self.dofmap.prolong(self.values)

    def __mul__(self, c):
        return FieldP1(c * self.values, self.dofmap, self.space)

    __rmul__ = __mul__

    def __add__(self, other):
        return FieldP1(self.nodal + other.nodal, self.dofmap, V)

    def __sub__(self, other):
        return FieldP1(self.nodal - other.nodal, self.dofmap, V)


def nodal_values(field) -> np.ndarray:
    return field.nodal if isinstance(field, FieldP1) else np.asarray(field, dtype=float)


def barycentric_gradients(mesh: Mesh) -> np.ndarray:
    """Gradients of the three hat functions on every triangle, shape (T, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    two_area = 2.0 * mesh.areas
    gx = np.column_stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]]) / two_area[:, None]
    gy = np.column_stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]]) / two_area[:, None]
    return np.stack([gx, gy], axis=-1)


def element_gradients(mesh: Mesh, field) -> np.ndarray:
    """Constant gradient of a P1 field on every triangle, shape (T, 2)."""
    u = nodal_values(field)[mesh.triangles]
    return np.einsum("tk,tkd->td", u, barycentric_gradients(mesh))


def quadrature_points(mesh: Mesh, rule: QuadratureRule = DATA_RULE, mask=None):
    """Physical quadrature points (T, n, 2) and weights (T, n) scaled by area."""
    tri = mesh.triangles if mask is None else mesh.triangles[mask]
    areas = mesh.areas if mask is None else mesh.areas[mask]
    p = mesh.vertices[tri]
    pts = np.einsum("qk,tkd->tqd", rule.points, p)
    return pts, areas[:, None] * rule.weights[None, :]


def _evaluate(f: Callable, pts: np.ndarray) -> np.ndarray:
    val = f(pts[..., 0], pts[..., 1])
    return np.broadcast_to(np.asarray(val, dtype=float), pts.shape[:-1])


def _scatter(mesh: Mesh, local: np.ndarray, mask=None) -> sp.csr_matrix:
    tri = mesh.triangles if mask is None else mesh.triangles[mask]
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.num_nodes
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def _region_mask(mesh: Mesh, region: RegionTag | None):
    if region is None:
        return None
    if len(region.mask) != mesh.num_triangles:
        raise InvalidArgumentError("region was tagged on a different mesh")
    return region.mask


def mass_matrix(mesh: Mesh, region: RegionTag | None = None) -> sp.csr_matrix:
    """m_X(u, v) = integral over X of u v, with X a tagged region (default: whole mesh)."""
    mask = _region_mask(mesh, region)
    areas = mesh.areas if mask is None else mesh.areas[mask]
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return _scatter(mesh, areas[:, None, None] * ref[None], mask)


def stiffness_matrix(mesh: Mesh) -> sp.csr_matrix:
    """a_h(u, v) = integral of grad u . grad v."""
    g = barycentric_gradients(mesh)
    local = mesh.areas[:, None, None] * np.einsum("tid,tjd->tij", g, g)
    return _scatter(mesh, local)


def face_jump_coefficients(mesh: Mesh, faces: FaceSet):
    """Node indices (F, 6) and weights (F, 6) so that the normal-gradient
    jump of a P1 field on face f is ``sum(weights[f] * u[nodes[f]])``.

    The jump is taken as the trace from ``faces.elements[:, 0]`` minus the
    trace from ``faces.elements[:, 1]``; repeated node indices are summed
    on assembly.
    """
    g = barycentric_gradients(mesh)
    n = faces.normals
    k0, k1 = faces.elements[:, 0], faces.elements[:, 1]
    w0 = np.einsum("tkd,td->tk", g[k0], n)
    w1 = -np.einsum("tkd,td->tk", g[k1], n)
    nodes = np.concatenate([mesh.triangles[k0], mesh.triangles[k1]], axis=1)
    return nodes, np.concatenate([w0, w1], axis=1)


def jump_stabilization(mesh: Mesh, faces: FaceSet, power: int, gamma: float = 1.0) -> sp.csr_matrix:
    """s_i(u, v) = gamma * sum_F h_F^i * |F| * [grad u . n_F][grad v . n_F]."""
    if power not in (1, 3, 5):
        raise InvalidArgumentError(f"jump power must be 1, 3 or 5, got {power}")
    if gamma < 0:
        raise InvalidArgumentError("gamma must be nonnegative")
    nodes, w = face_jump_coefficients(mesh, faces)
    scale = gamma * faces.lengths ** (power + 1)
    local = scale[:, None, None] * w[:, :, None] * w[:, None, :]
    rows = np.repeat(nodes, 6, axis=1).ravel()
    cols = np.tile(nodes, (1, 6)).ravel()
    n = mesh.num_nodes
    mat = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))
    mat.sum_duplicates()
    return mat


def load_vector(mesh: Mesh, f: Callable, region: RegionTag | None = None,
                rule: QuadratureRule = DATA_RULE) -> np.ndarray:
    """Entry j is the integral over the region of f times the j-th hat function."""
    mask = _region_mask(mesh, region)
    pts, wts = quadrature_points(mesh, rule, mask)
    fv = _evaluate(f, pts) * wts
    local = fv @ rule.points  # (T, 3)
    tri = mesh.triangles if mask is None else mesh.triangles[mask]
    return np.bincount(tri.ravel(), weights=local.ravel(), minlength=mesh.num_nodes)


def interpolate(mesh: Mesh, g: Callable, dofmap: DofMap | None = None) -> FieldP1:
    """Lagrange interpolant in V_h."""
    dofmap = dofmap or DofMap.from_mesh(mesh)
    vals = np.asarray(g(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float)
    vals = np.broadcast_to(vals, (mesh.num_nodes,)).copy()
    return FieldP1(vals, dofmap, V)


def restrict(obj, dofmap: DofMap, side: str = "both"):
    """Drop boundary rows and/or columns of a matrix, or boundary entries of a vector."""
    idx = dofmap.interior
    if isinstance(obj, FieldP1):
        obj = obj.nodal
    if sp.issparse(obj):
        if side not in ("rows", "cols", "both"):
            raise InvalidArgumentError(f"unknown side {side!r}")
        m = sp.csr_matrix(obj)
        if (side in ("rows", "both") and m.shape[0] != dofmap.num_nodes) or (
            side in ("cols", "both") and m.shape[1] != dofmap.num_nodes
        ):
            raise InvalidArgumentError(f"matrix shape {m.shape} does not match {dofmap.num_nodes} nodes")
        if side in ("rows", "both"):
            m = m[idx, :]
        if side in ("cols", "both"):
            m = m[:, idx]
        return m
    vec = np.asarray(obj)
    if vec.shape[0] != dofmap.num_nodes:
        raise InvalidArgumentError(f"vector of length {vec.shape[0]} does not match {dofmap.num_nodes} nodes")
    return vec[idx]


def l2_project(mesh: Mesh, source, space: str = V, dofmap: DofMap | None = None,
               mass: sp.spmatrix | None = None) -> FieldP1:
    """L2 projection of a callable or P1 field onto V_h or V_h^0."""
    dofmap = dofmap or DofMap.from_mesh(mesh)
    mass = mass_matrix(mesh) if mass is None else mass
    if callable(source):
        rhs = load_vector(mesh, source)
    else:
        rhs = mass @ nodal_values(source)
    if space == V:
        return FieldP1(linalg.solve(mass, rhs), dofmap, V)
    if space == V0:
        return FieldP1(linalg.solve(restrict(mass, dofmap), restrict(rhs, dofmap)), dofmap, V0)
    raise InvalidArgumentError(f"unknown space {space!r}")


def evaluate_at_quadrature(mesh: Mesh, field, rule: QuadratureRule = DATA_RULE, mask=None) -> np.ndarray:
    """Values of a P1 field at the physical quadrature points, shape (T, n)."""
    u = nodal_values(field)[mesh.triangles if mask is None else mesh.triangles[mask]]
    return u @ rule.points.T


def solve_poisson(mesh: Mesh, f: Callable | np.ndarray, dofmap: DofMap | None = None) -> FieldP1:
    """P1 solution of -Laplace(u) = f with homogeneous Dirichlet conditions.

    ``f`` is a callable or a precomputed load vector over all nodes.
    """
    dofmap = dofmap or DofMap.from_mesh(mesh)
    a = restrict(stiffness_matrix(mesh), dofmap)
    b = load_vector(mesh, f) if callable(f) else np.asarray(f)
    return FieldP1(linalg.solve(a, restrict(b, dofmap)), dofmap, V0)
