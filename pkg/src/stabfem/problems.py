"""Discrete optimality systems for data assimilation and source reconstruction.

Data assimilation (DA): find ``(u_h, lambda_h)`` in ``V_h x V_h^0`` with

    m_M(u, v) + s_1(u, v) + alpha a(u, v) + a(v, lambda) = m_M(u0, v)   for all v in V_h
    a(u, mu) = m(f, mu)                                                 for all mu in V_h^0

Source reconstruction (SR): find ``(u_h, q_h, lambda_h)`` in ``V_h^0 x V_h x V_h^0`` with

    m(u, v) + s_1(u, v) + a(v, lambda) = m(u0, v)    for all v in V_h^0
    m(lambda, w) - R(q, w) = 0                       for all w in V_h
    a(u, mu) = m(q, mu)                              for all mu in V_h^0

where ``R`` is ``s_5`` (jump mode), ``alpha m`` or ``beta a`` (Tikhonov modes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from . import fem, linalg
from .errors import InvalidArgumentError
from .fem import V, V0, DofMap, FieldP1
from .linalg import BlockSystem
from .mesh import FaceSet, Mesh, RegionTag, build_faces, tag_region

Data = Union[Callable, FieldP1, np.ndarray, None]

SR_MODES = ("jump", "tikhonov_l2", "tikhonov_h1", "none")


@dataclass
class DAConfig:
    region: RegionTag | tuple
    data: Data
    source: Data = None
    gamma: float = 1e-4
    tikhonov_alpha: float = 0.0
    allow_unstabilized: bool = False

    def __post_init__(self):
        if self.gamma < 0 or self.tikhonov_alpha < 0:
            raise InvalidArgumentError("gamma and tikhonov_alpha must be nonnegative")
        if self.gamma + self.tikhonov_alpha == 0 and not self.allow_unstabilized:
            raise InvalidArgumentError(
                "gamma = alpha = 0 gives the unstabilized system; pass allow_unstabilized=True to request it"
            )


@dataclass
class SRConfig:
    data: Data
    gamma1: float = 0.0
    gamma5: float = 1e-4
    mode: str = "jump"
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.mode not in SR_MODES:
            raise InvalidArgumentError(f"unknown regularization mode {self.mode!r}, expected one of {SR_MODES}")
        if min(self.gamma1, self.gamma5, self.alpha, self.beta) < 0:
            raise InvalidArgumentError("regularization weights must be nonnegative")
        if self.mode == "tikhonov_l2" and self.alpha <= 0:
            raise InvalidArgumentError("tikhonov_l2 needs alpha > 0")
        if self.mode == "tikhonov_h1" and self.beta <= 0:
            raise InvalidArgumentError("tikhonov_h1 needs beta > 0")

    @property
    def control_space(self) -> str:
        # without any control regularization the V_h control leaves the
        # boundary values undetermined, so the control lives in V_h^0
        return V0 if self.mode == "none" else V


@dataclass
class DASolution:
    u: FieldP1
    lam: FieldP1
    residual: float
    system: BlockSystem = field(repr=False)


@dataclass
class SRSolution:
    u: FieldP1
    q: FieldP1
    lam: FieldP1
    residual: float
    system: BlockSystem = field(repr=False)


def _data_load(mesh: Mesh, data: Data, region: RegionTag | None, mass: sp.spmatrix) -> np.ndarray:
    """Load vector of ``data`` against all hats, integrated over ``region``."""
    if data is None:
        return np.zeros(mesh.num_nodes)
    if callable(data):
        return fem.load_vector(mesh, data, region)
    vals = fem.nodal_values(data)
    if vals.shape != (mesh.num_nodes,):
        raise InvalidArgumentError(f"data field has {vals.shape[0]} values, mesh has {mesh.num_nodes} nodes")
    return mass @ vals


def _discretization(mesh, faces, dofmap):
    return faces if faces is not None else build_faces(mesh), dofmap or DofMap.from_mesh(mesh)


def assemble_da(mesh: Mesh, cfg: DAConfig, faces: FaceSet | None = None,
                dofmap: DofMap | None = None) -> BlockSystem:
    faces, dofmap = _discretization(mesh, faces, dofmap)
    region = cfg.region if isinstance(cfg.region, RegionTag) else tag_region(mesh, cfg.region, "M")
    m_reg = fem.mass_matrix(mesh, region)
    a = fem.stiffness_matrix(mesh)
    top = m_reg
    if cfg.gamma > 0:
        top = top + fem.jump_stabilization(mesh, faces, 1, cfg.gamma)
    if cfg.tikhonov_alpha > 0:
        top = top + cfg.tikhonov_alpha * a
    a_i = fem.restrict(a, dofmap, "rows")  # (N0, N): a(u, mu) for mu in V_h^0

    system = BlockSystem(["u", "lambda"], [dofmap.num_nodes, dofmap.num_interior])
    system.set_block("u", "u", top)
    system.set_block("u", "lambda", a_i, transpose=True)
    system.set_block("lambda", "u", a_i)
    system.set_rhs("u", _data_load(mesh, cfg.data, region, m_reg))
    m_full = fem.mass_matrix(mesh) if not callable(cfg.source) and cfg.source is not None else None
    system.set_rhs("lambda", fem.restrict(_data_load(mesh, cfg.source, None, m_full), dofmap))
    return system


def solve_da(mesh: Mesh, cfg: DAConfig, faces: FaceSet | None = None, dofmap: DofMap | None = None,
             tol: float = linalg.DEFAULT_TOL) -> DASolution:
    """Stabilized (or Tikhonov-regularized) data assimilation solve."""
    faces, dofmap = _discretization(mesh, faces, dofmap)
    system = assemble_da(mesh, cfg, faces, dofmap)
    matrix, rhs = system.assemble()
    x = linalg.solve(matrix, rhs, tol)
    parts = system.split(x)
    return DASolution(
        FieldP1(parts["u"], dofmap, V),
        FieldP1(parts["lambda"], dofmap, V0),
        linalg.relative_residual(matrix, x, rhs),
        system,
    )


def control_operator(mesh: Mesh, faces: FaceSet, cfg: SRConfig) -> sp.csr_matrix:
    """Regularization form R(q, w) acting on the control."""
    if cfg.mode == "jump":
        return fem.jump_stabilization(mesh, faces, 5, cfg.gamma5)
    if cfg.mode == "tikhonov_l2":
        return cfg.alpha * fem.mass_matrix(mesh)
    if cfg.mode == "tikhonov_h1":
        return cfg.beta * fem.stiffness_matrix(mesh)
    return sp.csr_matrix((mesh.num_nodes, mesh.num_nodes))


def assemble_sr(mesh: Mesh, cfg: SRConfig, faces: FaceSet | None = None,
                dofmap: DofMap | None = None) -> BlockSystem:
    faces, dofmap = _discretization(mesh, faces, dofmap)
    m = fem.mass_matrix(mesh)
    a = fem.stiffness_matrix(mesh)
    top = m
    if cfg.gamma1 > 0:
        top = top + fem.jump_stabilization(mesh, faces, 1, cfg.gamma1)
    reg = control_operator(mesh, faces, cfg)
    qspace = cfg.control_space
    n0 = dofmap.num_interior
    nq = dofmap.size(qspace)
    m_iq = fem.restrict(m, dofmap, "rows" if qspace == V else "both")  # (N0, Nq)
    if qspace == V0:
        reg = fem.restrict(reg, dofmap)

    system = BlockSystem(["u", "q", "lambda"], [n0, nq, n0])
    system.set_block("u", "u", fem.restrict(top, dofmap))
    system.set_block("u", "lambda", fem.restrict(a, dofmap))
    system.set_block("q", "q", reg, sign=-1.0)
    system.set_block("q", "lambda", m_iq, transpose=True)
    system.set_block("lambda", "u", fem.restrict(a, dofmap))
    system.set_block("lambda", "q", m_iq, sign=-1.0)
    system.set_rhs("u", fem.restrict(_data_load(mesh, cfg.data, None, m), dofmap))
    return system


def solve_sr(mesh: Mesh, cfg: SRConfig, faces: FaceSet | None = None, dofmap: DofMap | None = None,
             tol: float = linalg.DEFAULT_TOL) -> SRSolution:
    """Source reconstruction solve."""
    faces, dofmap = _discretization(mesh, faces, dofmap)
    system = assemble_sr(mesh, cfg, faces, dofmap)
    matrix, rhs = system.assemble()
    x = linalg.solve(matrix, rhs, tol)
    parts = system.split(x)
    return SRSolution(
        FieldP1(parts["u"], dofmap, V0),
        FieldP1(parts["q"], dofmap, cfg.control_space),
        FieldP1(parts["lambda"], dofmap, V0),
        linalg.relative_residual(matrix, x, rhs),
        system,
    )


@dataclass(frozen=True)
class RadialProfile:
    """u = 1 for r <= r0, u = 0 for r >= r1, C1 cubic in between."""

    r0: float = 0.25
    r1: float = 0.75

    def _t(self, r):
        return np.clip((r - self.r0) / (self.r1 - self.r0), 0.0, 1.0)

    def radial(self, r):
        t = self._t(r)
        return 1.0 - 3.0 * t**2 + 2.0 * t**3

    def radial_d1(self, r):
        t = self._t(r)
        return 6.0 * (t**2 - t) / (self.r1 - self.r0)

    def radial_d2(self, r):
        t = np.asarray(self._t(r))
        inside = (np.asarray(r) > self.r0) & (np.asarray(r) < self.r1)
        return np.where(inside, 6.0 * (2.0 * t - 1.0) / (self.r1 - self.r0) ** 2, 0.0)

    def u(self, x, y):
        return self.radial(np.hypot(x, y))

    def grad_u(self, x, y):
        r = np.hypot(x, y)
        d1 = self.radial_d1(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(r > 0, d1 / r, 0.0)
        return s * x, s * y

    def q(self, x, y):
        """-Laplace(u) = -(u'' + u'/r); zero outside the annulus."""
        r = np.hypot(x, y)
        with np.errstate(invalid="ignore", divide="ignore"):
            d1r = np.where(r > 0, self.radial_d1(r) / np.where(r > 0, r, 1.0), 0.0)
        return -(self.radial_d2(r) + d1r)


def build_nonsmooth_radial(r0: float = 0.25, r1: float = 0.75):
    """Exact state and source of the non-smooth radial test case."""
    prof = RadialProfile(r0, r1)
    return prof.u, prof.q
