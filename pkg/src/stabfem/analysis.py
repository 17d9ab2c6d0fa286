"""Error norms, triple norms, convergence rates and discrete stability diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fem, linalg
from .errors import InsufficientDataError, InvalidArgumentError
from .fem import DATA_RULE, DofMap, FieldP1
from .mesh import FaceSet, Mesh, RegionTag, refine_uniform


def _mask(region):
    return None if region is None else region.mask


def _exact_values(exact, pts):
    if exact is None:
        return 0.0
    return np.asarray(exact(pts[..., 0], pts[..., 1]), dtype=float)


def l2_error(mesh: Mesh, field, exact: Callable | None = None, region: RegionTag | None = None) -> float:
    """L2 norm of ``field - exact`` over ``region`` (degree-6 quadrature).

    ``field`` may be a FieldP1, a nodal array or None (zero).
    """
    mask = _mask(region)
    pts, w = fem.quadrature_points(mesh, DATA_RULE, mask)
    vals = 0.0 if field is None else fem.evaluate_at_quadrature(mesh, field, DATA_RULE, mask)
    diff = vals - _exact_values(exact, pts)
    return float(np.sqrt(np.sum(w * diff**2)))


def h1_seminorm_error(mesh: Mesh, field, exact_gradient: Callable | None = None,
                      region: RegionTag | None = None) -> float:
    """L2 norm of ``grad(field) - exact_gradient``."""
    mask = _mask(region)
    pts, w = fem.quadrature_points(mesh, DATA_RULE, mask)
    if field is None:
        g = np.zeros((pts.shape[0], 2))
    else:
        g = fem.element_gradients(mesh, field)
        g = g if mask is None else g[mask]
    if exact_gradient is None:
        gx = gy = 0.0
    else:
        gx, gy = exact_gradient(pts[..., 0], pts[..., 1])
    return float(np.sqrt(np.sum(w * ((g[:, None, 0] - gx) ** 2 + (g[:, None, 1] - gy) ** 2))))


def p1_norms(mesh: Mesh, values, mass=None, stiffness=None) -> tuple[float, float]:
    """(L2 norm, H1 seminorm) of a P1 field via assembled matrices."""
    v = fem.nodal_values(values)
    mass = fem.mass_matrix(mesh) if mass is None else mass
    stiffness = fem.stiffness_matrix(mesh) if stiffness is None else stiffness
    return float(np.sqrt(max(v @ (mass @ v), 0.0))), float(np.sqrt(max(v @ (stiffness @ v), 0.0)))


def seminorm(matrix, values) -> float:
    v = fem.nodal_values(values)
    return float(np.sqrt(max(v @ (matrix @ v), 0.0)))


def hminus1_error(mesh: Mesh, field=None, exact: Callable | None = None) -> float:
    """Discrete H^{-1} surrogate of ``exact - field``.

    Solves ``a(z, mu) = m(exact - field, mu)`` for all ``mu`` in V^0 on the
    once-refined mesh and returns ``||grad z||``.
    """
    fine, parents = refine_uniform(mesh)
    rhs = np.zeros(fine.num_nodes)
    if exact is not None:
        rhs += fem.load_vector(fine, exact)
    if field is not None:
        coarse = fem.nodal_values(field)
        prolonged = np.concatenate([coarse, coarse[parents].mean(axis=1)])
        rhs -= fem.mass_matrix(fine) @ prolonged
    dm = DofMap.from_mesh(fine)
    b = fem.restrict(rhs, dm)
    if not np.any(b):
        return 0.0
    z = linalg.solve(fem.restrict(fem.stiffness_matrix(fine), dm), b)
    return float(np.sqrt(max(z @ b, 0.0)))


def triple_norm_da(mesh: Mesh, faces: FaceSet, region: RegionTag, v, mu, gamma: float = 1.0) -> float:
    """||v||_M + h ||v||_H1 + |v|_s1 + ||mu||_H1 with h the global mesh size."""
    h = mesh.h_global
    mass, stiff = fem.mass_matrix(mesh), fem.stiffness_matrix(mesh)
    v_l2, v_h1 = p1_norms(mesh, v, mass, stiff)
    mu_l2, mu_h1 = p1_norms(mesh, mu, mass, stiff)
    return (
        seminorm(fem.mass_matrix(mesh, region), v)
        + h * math.hypot(v_l2, v_h1)
        + seminorm(fem.jump_stabilization(mesh, faces, 1, gamma), v)
        + math.hypot(mu_l2, mu_h1)
    )


def triple_norm_sr(mesh: Mesh, faces: FaceSet, v, w, mu, gamma1: float = 1.0, gamma5: float = 1.0) -> float:
    """||v|| + ||h w|| + ||mu / h|| + |v|_s1 + |w|_s5."""
    h = mesh.h_global
    mass = fem.mass_matrix(mesh)
    return (
        seminorm(mass, v)
        + h * seminorm(mass, w)
        + seminorm(mass, mu) / h
        + seminorm(fem.jump_stabilization(mesh, faces, 1, gamma1), v)
        + seminorm(fem.jump_stabilization(mesh, faces, 5, gamma5), w)
    )


# -- convergence bookkeeping -------------------------------------------------

@dataclass
class ErrorRecord:
    level: int
    nodes: int
    h_global: float
    errors: dict[str, float] = field(default_factory=dict)
    seminorms: dict[str, float] = field(default_factory=dict)
    status: str = "ok"

    @property
    def h_nodes(self) -> float:
        return 1.0 / math.sqrt(self.nodes)

    def h(self, convention: str) -> float:
        if convention == "h_nodes":
            return self.h_nodes
        if convention == "h_global":
            return self.h_global
        raise InvalidArgumentError(f"unknown mesh-size convention {convention!r}")


def rate(e0: float, e1: float, h0: float, h1: float) -> float:
    """Observed order between two levels; NaN when undefined."""
    if not (e0 > 0 and e1 > 0 and np.isfinite(e0) and np.isfinite(e1)) or h0 == h1:
        return math.nan
    return math.log(e0 / e1) / math.log(h0 / h1)


def compute_rates(records: list[ErrorRecord], convention: str = "h_global") -> dict[str, list[float]]:
    """Pairwise rates between consecutive levels for every error column."""
    if len(records) < 2:
        raise InsufficientDataError("at least two levels are needed for a rate")
    names = list(records[0].errors)
    out = {}
    for name in names:
        out[name] = [
            rate(a.errors.get(name, math.nan), b.errors.get(name, math.nan), a.h(convention), b.h(convention))
            for a, b in zip(records[:-1], records[1:])
        ]
    return out


def fitted_slope(h, errors) -> float:
    """Least-squares slope of log(error) against log(h)."""
    h, e = np.asarray(h, dtype=float), np.asarray(errors, dtype=float)
    ok = (e > 0) & np.isfinite(e)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(h[ok]), np.log(e[ok]), 1)[0])


@dataclass
class ConvergenceReport:
    name: str
    records: list[ErrorRecord]
    convention: str = "h_global"
    meta: dict[str, str] = field(default_factory=dict)

    @property
    def error_names(self) -> list[str]:
        names: list[str] = []
        for r in self.records:
            names += [k for k in r.errors if k not in names]
        return names

    @property
    def seminorm_names(self) -> list[str]:
        names: list[str] = []
        for r in self.records:
            names += [k for k in r.seminorms if k not in names]
        return names

    def column(self, name: str) -> np.ndarray:
        return np.array([r.errors.get(name, math.nan) for r in self.records])

    def h(self) -> np.ndarray:
        return np.array([r.h(self.convention) for r in self.records])

    def rates(self) -> dict[str, list[float]]:
        if len(self.records) < 2:
            return {n: [] for n in self.error_names}
        return compute_rates(self.records, self.convention)

    def slope(self, name: str, last: int | None = None) -> float:
        h, e = self.h(), self.column(name)
        if last is not None:
            h, e = h[-last:], e[-last:]
        return fitted_slope(h, e)


# seminorm keys monitored by the refinement criteria
MONITORS_NONINCREASING = ("grad_uh", "qh_l2")
MONITORS_DECREASING = ("s1_uh", "s5_qh")


def pair_flags(a: ErrorRecord, b: ErrorRecord, prefix: str = "") -> tuple[bool, bool] | None:
    """Refinement criteria (1) and (2) from level ``a`` to the finer level ``b``.

    Criterion 1: ||grad u_h|| and ||q_h|| non-increasing. Criterion 2:
    s_1(u_h, u_h) and s_5(q_h, q_h) strictly decreasing. Monitors are looked
    up as ``prefix + key``; None when a level lacks all of them.
    """
    def values(keys):
        out = []
        for k in keys:
            x0, x1 = a.seminorms.get(prefix + k), b.seminorms.get(prefix + k)
            if x0 is not None and x1 is not None:
                out.append((x0, x1))
        return out

    inc, dec = values(MONITORS_NONINCREASING), values(MONITORS_DECREASING)
    if not inc and not dec:
        return None
    if any(not (np.isfinite(x0) and np.isfinite(x1)) for x0, x1 in inc + dec):
        return None
    return all(x1 <= x0 for x0, x1 in inc), all(x1 < x0 for x0, x1 in dec)


def refinement_flags(report: ConvergenceReport, prefix: str = "") -> dict[str, list[bool] | bool]:
    """Refinement criteria for every consecutive pair of levels carrying monitors."""
    pairs = [pair_flags(a, b, prefix) for a, b in zip(report.records[:-1], report.records[1:])]
    pairs = [p for p in pairs if p is not None]
    if not pairs:
        raise InsufficientDataError("refinement criteria need at least two levels with monitored quantities")
    c1 = [p[0] for p in pairs]
    c2 = [p[1] for p in pairs]
    return {"criterion_1": c1, "criterion_2": c2, "trustworthy": all(c1) and all(c2)}


# -- stability diagnostics ---------------------------------------------------

def random_fields(mesh: Mesh, samples: int, seed: int) -> np.ndarray:
    """Seeded i.i.d. uniform(-1, 1) nodal values, shape (N, samples)."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(samples, mesh.num_nodes)).T


def poincare_ratio(mesh: Mesh, faces: FaceSet, region: RegionTag, v) -> float:
    """h ||v||_H1 / (||v||_L2(M) + |v|_s1) with unit stabilization weight."""
    return _poincare_ratios(mesh, faces, region, np.asarray(fem.nodal_values(v))[:, None])[0]


def _poincare_parts(mesh, faces, region):
    mass, stiff = fem.mass_matrix(mesh), fem.stiffness_matrix(mesh)
    return mass + stiff, fem.mass_matrix(mesh, region), fem.jump_stabilization(mesh, faces, 1, 1.0)


def _quad(mat, X):
    return np.maximum(np.einsum("ij,ij->j", X, mat @ X), 0.0)


def _poincare_ratios(mesh, faces, region, X, parts=None):
    h1, m_reg, s1 = parts or _poincare_parts(mesh, faces, region)
    num = mesh.h_global * np.sqrt(_quad(h1, X))
    den = np.sqrt(_quad(m_reg, X)) + np.sqrt(_quad(s1, X))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    return r[den > 0]


def diagnose_poincare(mesh: Mesh, faces: FaceSet, region: RegionTag, samples: int = 200, seed: int = 0,
                      iterations: int = 20) -> float:
    """Estimate the discrete Poincare constant C_p.

    Seeded uniform(-1, 1) nodal fields seed a block subspace iteration for
    the pencil (h^2 (M + A), M_region + S_1); the estimate is the largest
    ratio over the sampled fields and the Ritz vectors. ``iterations=0``
    returns the plain sample maximum.
    """
    parts = _poincare_parts(mesh, faces, region)
    h1, m_reg, s1 = parts
    X = random_fields(mesh, samples, seed)
    best = float(np.max(_poincare_ratios(mesh, faces, region, X, parts), initial=0.0))
    if iterations <= 0:
        return best
    lhs = (mesh.h_global**2) * h1
    rhs_lu = spla.splu(sp.csc_matrix(m_reg + s1))
    Q = np.linalg.qr(X)[0]
    for _ in range(iterations):
        Q = np.linalg.qr(rhs_lu.solve(lhs @ Q))[0]
    # Rayleigh-Ritz on the final subspace
    a_small = Q.T @ (lhs @ Q)
    b_small = Q.T @ ((m_reg + s1) @ Q)
    _, vecs = sla.eigh(0.5 * (a_small + a_small.T), 0.5 * (b_small + b_small.T))
    ritz = Q @ vecs[:, -min(10, vecs.shape[1]):]
    cand = np.concatenate([_poincare_ratios(mesh, faces, region, Q, parts),
                           _poincare_ratios(mesh, faces, region, ritz, parts)])
    return max(best, float(cand.max(initial=0.0)))


def norm_equivalence_ratios(mesh: Mesh, faces: FaceSet, X: np.ndarray, dofmap: DofMap | None = None):
    """||v|| / (||pi_h^0 v|| + |v|_s3) for every column of X."""
    dofmap = dofmap or DofMap.from_mesh(mesh)
    mass = fem.mass_matrix(mesh)
    s3 = fem.jump_stabilization(mesh, faces, 3, 1.0)
    m0 = sp.csc_matrix(fem.restrict(mass, dofmap))
    lu = spla.splu(m0)
    b = fem.restrict(mass, dofmap, "rows") @ X
    proj = lu.solve(b)
    proj_norm = np.sqrt(np.maximum(np.einsum("ij,ij->j", proj, m0 @ proj), 0.0))
    den = proj_norm + np.sqrt(_quad(s3, X))
    num = np.sqrt(_quad(mass, X))
    ok = den > 0
    return num[ok] / den[ok]


def diagnose_norm_equivalence(mesh: Mesh, faces: FaceSet, samples: int = 200, seed: int = 0) -> tuple[float, float]:
    """(c1, c2) estimates as min and max ratio over seeded random fields."""
    r = norm_equivalence_ratios(mesh, faces, random_fields(mesh, samples, seed))
    return float(r.min()), float(r.max())


def norm_equivalence_lower_bound(mesh: Mesh, faces: FaceSet) -> float:
    """min over ||v|| = 1 of ||pi_h^0 v||^2 + |v|_s3^2 (dense, small meshes only)."""
    dofmap = DofMap.from_mesh(mesh)
    mass = fem.mass_matrix(mesh).toarray()
    s3 = fem.jump_stabilization(mesh, faces, 3, 1.0).toarray()
    m_ri = mass[dofmap.interior, :]
    m0 = mass[np.ix_(dofmap.interior, dofmap.interior)]
    g = m_ri.T @ np.linalg.solve(m0, m_ri) + s3
    return float(sla.eigh(0.5 * (g + g.T), mass, eigvals_only=True)[0])
