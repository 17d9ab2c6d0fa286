"""Dense brute-force assembly used to cross-check the sparse code.

Everything here loops over elements and element pairs explicitly and
derives shape-function gradients by inverting the local Vandermonde
matrix, independently of the vectorized routines in :mod:`stabfem.fem`.
"""

from __future__ import annotations

import itertools

import numpy as np

from ..mesh import Mesh


def _local_basis(p: np.ndarray):
    """Coefficients (a, b, c) of the hats a + b x + c y on the triangle ``p``."""
    vander = np.column_stack([np.ones(3), p[:, 0], p[:, 1]])
    return np.linalg.inv(vander)  # column i holds the coefficients of hat i


def _area(p: np.ndarray) -> float:
    return 0.5 * abs(np.linalg.det(np.column_stack([p[1] - p[0], p[2] - p[0]])))


def dense_mass(mesh: Mesh, mask=None) -> np.ndarray:
    """Exact P1 mass matrix via the edge-midpoint rule (exact for quadratics)."""
    n = mesh.num_nodes
    out = np.zeros((n, n))
    for t, tri in enumerate(mesh.triangles):
        if mask is not None and not mask[t]:
            continue
        p = mesh.vertices[tri]
        coef = _local_basis(p)
        mids = 0.5 * (p + np.roll(p, -1, axis=0))
        vals = np.column_stack([np.ones(3), mids]) @ coef  # (midpoint, hat)
        local = _area(p) / 3.0 * vals.T @ vals
        for a, b in itertools.product(range(3), range(3)):
            out[tri[a], tri[b]] += local[a, b]
    return out


def dense_stiffness(mesh: Mesh) -> np.ndarray:
    n = mesh.num_nodes
    out = np.zeros((n, n))
    for tri in mesh.triangles:
        p = mesh.vertices[tri]
        grads = _local_basis(p)[1:, :].T  # (hat, 2)
        local = _area(p) * grads @ grads.T
        for a, b in itertools.product(range(3), range(3)):
            out[tri[a], tri[b]] += local[a, b]
    return out


def dense_jump(mesh: Mesh, power: int, gamma: float = 1.0) -> np.ndarray:
    """Gradient-jump stabilization found by an all-pairs shared-edge search."""
    n = mesh.num_nodes
    out = np.zeros((n, n))
    tris = [tuple(t) for t in mesh.triangles]
    for k0, k1 in itertools.combinations(range(len(tris)), 2):
        shared = sorted(set(tris[k0]) & set(tris[k1]))
        if len(shared) != 2:
            continue
        a, b = mesh.vertices[shared[0]], mesh.vertices[shared[1]]
        length = float(np.hypot(*(b - a)))
        normal = np.array([b[1] - a[1], a[0] - b[0]]) / length
        jump = np.zeros(n)
        for sign, k in ((1.0, k0), (-1.0, k1)):
            tri = np.array(tris[k])
            grads = _local_basis(mesh.vertices[tri])[1:, :].T
            jump[tri] += sign * grads @ normal
        out += gamma * length**power * length * np.outer(jump, jump)
    return out


def dense_load(mesh: Mesh, f, order: int = 8) -> np.ndarray:
    """Load vector with a tensor Gauss rule on the square mapped onto each triangle."""
    g, w = np.polynomial.legendre.leggauss(order)
    g, w = 0.5 * (g + 1.0), 0.5 * w
    out = np.zeros(mesh.num_nodes)
    for tri in mesh.triangles:
        p = mesh.vertices[tri]
        coef = _local_basis(p)
        for (s, ws), (t, wt) in itertools.product(zip(g, w), zip(g, w)):
            lam = np.array([1.0 - s, s * (1.0 - t), s * t])
            x, y = lam @ p
            jac = 2.0 * _area(p) * s
            hats = np.array([1.0, x, y]) @ coef
            out[tri] += ws * wt * jac * f(x, y) * hats
    return out
