"""Structured triangulations of rectangles, interior faces and region tags."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidMeshError, RegionUnresolvedError

Rect = tuple[float, float, float, float]  # (x0, x1, y0, y1)


def _as_rect(rect: Sequence[float]) -> Rect:
    if len(rect) != 4:
        raise InvalidArgumentError(f"rectangle needs 4 numbers (x0, x1, y0, y1), got {rect!r}")
    x0, x1, y0, y1 = (float(r) for r in rect)
    return x0, x1, y0, y1


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation of an axis-aligned rectangle.

    ``vertices`` has shape (N, 2), ``triangles`` shape (T, 3) with
    counterclockwise vertex order. ``domain`` is ``(x0, x1, y0, y1)``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray
    domain: Rect
    shape: tuple[int, int] | None = None

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.boundary_nodes):
            arr.setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def diameters(self) -> np.ndarray:
        """Circumdiameter of every triangle."""
        p = self.vertices[self.triangles]
        a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
        b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
        c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
        return a * b * c / (2.0 * self.areas)

    @property
    def h_global(self) -> float:
        return float(self.diameters.max())

    @property
    def h_nodes(self) -> float:
        """Mesh size as the inverse square root of the node count."""
        return 1.0 / np.sqrt(self.num_nodes)

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def min_angle(self) -> float:
        p = self.vertices[self.triangles]
        angles = []
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            v = p[:, (k + 2) % 3] - p[:, k]
            cos = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
        return float(np.min(angles))

    def export_text(self, path) -> None:
        """Write ``v x y`` and ``t i j k`` lines (0-based indices)."""
        with open(path, "w") as fh:
            for x, y in self.vertices:
                fh.write(f"v {x!r} {y!r}\n")
            for i, j, k in self.triangles:
                fh.write(f"t {i} {j} {k}\n")


@dataclass(frozen=True, eq=False)
class FaceSet:
    """Interior edges of a mesh.

    For face ``f``: ``elements[f]`` are the two adjacent triangles,
    ``nodes[f]`` the endpoints, ``normals[f]`` a fixed unit normal pointing
    from ``elements[f, 0]`` into ``elements[f, 1]``, ``lengths[f]`` is h_F.
    """

    elements: np.ndarray
    nodes: np.ndarray
    normals: np.ndarray
    lengths: np.ndarray

    def __len__(self):
        return len(self.lengths)


@dataclass(frozen=True, eq=False)
class RegionTag:
    """Per-triangle membership of an axis-aligned region."""

    name: str
    mask: np.ndarray
    rect: Rect | None = field(default=None)

    def __post_init__(self):
        self.mask.setflags(write=False)

    def area(self, mesh: Mesh) -> float:
        return float(mesh.areas[self.mask].sum())

    @property
    def empty(self) -> bool:
        return not self.mask.any()


def _boundary_nodes(vertices, domain, tol=1e-12):
    x0, x1, y0, y1 = domain
    scale = max(x1 - x0, y1 - y0)
    x, y = vertices[:, 0], vertices[:, 1]
    on = (
        (np.abs(x - x0) < tol * scale)
        | (np.abs(x - x1) < tol * scale)
        | (np.abs(y - y0) < tol * scale)
        | (np.abs(y - y1) < tol * scale)
    )
    return np.flatnonzero(on)


def generate_structured(nx: int, ny: int, rect: Sequence[float] = (0.0, 1.0, 0.0, 1.0)) -> Mesh:
    """Split an ``nx`` x ``ny`` grid of cells along the lower-left to
    upper-right diagonal.

    Vertex ``(i, j)`` (column i, row j) gets index ``j * (nx + 1) + i``.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise InvalidArgumentError(f"cell counts must be positive integers, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    x0, x1, y0, y1 = _as_rect(rect)
    if not (x1 > x0 and y1 > y0):
        raise InvalidArgumentError(f"degenerate rectangle {rect!r}")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    ll = j * (nx + 1) + i
    lr = ll + 1
    ul = ll + nx + 1
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    domain = (x0, x1, y0, y1)
    return Mesh(vertices, triangles, _boundary_nodes(vertices, domain), domain, shape=(nx, ny))


def refine_uniform(mesh: Mesh) -> tuple[Mesh, np.ndarray]:
    """Red refinement: split every triangle into four through edge midpoints.

    Returns the fine mesh and an ``(M, 2)`` array with the coarse endpoints
    of each new midpoint node (fine node ``N + m`` sits at the midpoint of
    ``parents[m]``). Coarse nodes keep their indices.
    """
    tri = mesh.triangles
    n = mesh.num_nodes
    edges = np.sort(np.concatenate([tri[:, [1, 2]], tri[:, [2, 0]], tri[:, [0, 1]]]), axis=1)
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    t = len(tri)
    # midpoint opposite local vertex k
    m0, m1, m2 = (n + inverse[k * t:(k + 1) * t] for k in range(3))
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    fine_tri = np.concatenate([
        np.column_stack([a, m2, m1]),
        np.column_stack([m2, b, m0]),
        np.column_stack([m1, m0, c]),
        np.column_stack([m0, m1, m2]),
    ])
    verts = np.concatenate([mesh.vertices, mesh.vertices[uniq].mean(axis=1)])
    shape = None if mesh.shape is None else (2 * mesh.shape[0], 2 * mesh.shape[1])
    fine = Mesh(verts, fine_tri, _boundary_nodes(verts, mesh.domain), mesh.domain, shape=shape)
    return fine, uniq


def build_faces(mesh: Mesh) -> FaceSet:
    """Enumerate interior edges by an edge-multiplicity scan."""
    tri = mesh.triangles
    t = len(tri)
    local = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    owner = np.tile(np.arange(t), 3)
    key = np.sort(local, axis=1)
    order = np.lexsort((key[:, 1], key[:, 0]))
    key, owner = key[order], owner[order]
    uniq, start, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    if np.any(counts > 2):
        raise InvalidMeshError("an edge is shared by more than two triangles")
    interior = counts == 2
    first = start[interior]
    elements = np.column_stack([owner[first], owner[first + 1]])
    nodes = uniq[interior]

    # boundary edges must lie on the rectangle boundary, otherwise the mesh is non-conforming
    bmask = np.zeros(mesh.num_nodes, dtype=bool)
    bmask[mesh.boundary_nodes] = True
    bedges = uniq[~interior]
    if not np.all(bmask[bedges]):
        raise InvalidMeshError("hanging or non-conforming edge found in the mesh interior")

    p, q = mesh.vertices[nodes[:, 0]], mesh.vertices[nodes[:, 1]]
    tangent = q - p
    lengths = np.linalg.norm(tangent, axis=1)
    normals = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / lengths[:, None]
    # orient from elements[:, 0] towards elements[:, 1]
    c0 = mesh.centroids[elements[:, 0]]
    flip = np.einsum("ij,ij->i", normals, c0 - p) > 0
    normals[flip] *= -1.0
    fs = FaceSet(elements, nodes, normals, lengths)
    for arr in (elements, nodes, normals, lengths):
        arr.setflags(write=False)
    return fs


def tag_region(mesh: Mesh, rect: Sequence[float], name: str = "region", tol: float = 1e-10) -> RegionTag:
    """Tag triangles lying in the closed rectangle ``rect``.

    The region must be a union of whole triangles; a rectangle whose sides
    cut through elements raises :class:`RegionUnresolvedError`.
    """
    x0, x1, y0, y1 = _as_rect(rect)
    if x1 < x0 or y1 < y0:
        raise InvalidArgumentError(f"invalid rectangle {rect!r}")
    scale = max(mesh.domain[1] - mesh.domain[0], mesh.domain[3] - mesh.domain[2])
    eps = tol * scale
    c = mesh.centroids
    p = mesh.vertices[mesh.triangles]
    inside_c = (c[:, 0] > x0) & (c[:, 0] < x1) & (c[:, 1] > y0) & (c[:, 1] < y1)
    inside_v = np.all(
        (p[..., 0] >= x0 - eps) & (p[..., 0] <= x1 + eps) & (p[..., 1] >= y0 - eps) & (p[..., 1] <= y1 + eps),
        axis=1,
    )
    mask = inside_c & inside_v

    dx0, dx1, dy0, dy1 = mesh.domain
    cx = max(0.0, min(x1, dx1) - max(x0, dx0))
    cy = max(0.0, min(y1, dy1) - max(y0, dy0))
    expected = cx * cy
    got = float(mesh.areas[mask].sum())
    if abs(got - expected) > 1e-9 * (dx1 - dx0) * (dy1 - dy0):
        raise RegionUnresolvedError(
            f"region {name} {rect!r} is not a union of mesh triangles "
            f"(tagged area {got:.6g}, rectangle area {expected:.6g})"
        )
    return RegionTag(name, mask, (x0, x1, y0, y1))


def whole_domain(mesh: Mesh) -> RegionTag:
    return RegionTag("domain", np.ones(mesh.num_triangles, dtype=bool), mesh.domain)


def refine_family(nx: int, ny: int, rect: Sequence[float], levels: int) -> list[Mesh]:
    """Structured meshes with cell counts doubling per level."""
    if levels < 1:
        raise InvalidArgumentError("levels must be >= 1")
    return [generate_structured(nx * 2**k, ny * 2**k, rect) for k in range(levels)]


def square(center: tuple[float, float], half_width: float) -> Rect:
    cx, cy = center
    return (cx - half_width, cx + half_width, cy - half_width, cy + half_width)
