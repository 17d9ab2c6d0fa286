"""Data perturbations and measured data on regular grids."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .. import fem
from ..errors import InvalidArgumentError
from ..fem import DATA_RULE, DofMap, FieldP1, collapsed_gauss
from ..mesh import Mesh, Rect, generate_structured

# sources of the unfitted study jump inside cut cells; a dense rule keeps the
# quadrature error there well below the fitted/unfitted difference
SOURCE_RULE = collapsed_gauss(24)

KINDS = ("none", "uniform_noise", "h_scaled_noise", "coarse_sampling", "unfitted_substitute")


@dataclass(frozen=True)
class PerturbationSpec:
    """How measured data deviates from the exact data.

    ``amplitude`` is used by uniform_noise, ``coefficient`` by h_scaled_noise
    (amplitude ``coefficient * h_global``), ``coarse_h`` by coarse_sampling and
    the two fine resolutions by unfitted_substitute.
    """

    kind: str = "none"
    amplitude: float = 0.0
    coefficient: float = 0.0
    coarse_h: float = 0.0
    nx_fitted: int = 120
    nx_unfitted: int = 110
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown perturbation kind {self.kind!r}, expected one of {KINDS}")
        if min(self.amplitude, self.coefficient, self.coarse_h) < 0:
            raise InvalidArgumentError("perturbation amplitudes must be nonnegative")
        if self.kind == "coarse_sampling" and self.coarse_h <= 0:
            raise InvalidArgumentError("coarse_sampling needs coarse_h > 0")


@dataclass(frozen=True, eq=False)
class MeasuredField:
    """Samples on a tensor grid, evaluated by bilinear interpolation.

    ``values[i, j]`` is the sample at ``(x[i], y[j])``.
    """

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.x), len(self.y)):
            raise InvalidArgumentError(
                f"values of shape {self.values.shape} do not match a {len(self.x)} x {len(self.y)} grid"
            )
        if len(self.x) < 2 or len(self.y) < 2:
            raise InvalidArgumentError("a measured field needs at least two samples per direction")
        object.__setattr__(
            self, "_interp", RegularGridInterpolator((self.x, self.y), self.values, method="linear")
        )

    @property
    def bounds(self) -> Rect:
        return float(self.x[0]), float(self.x[-1]), float(self.y[0]), float(self.y[-1])

    def covers(self, rect: Rect, tol: float = 1e-12) -> bool:
        x0, x1, y0, y1 = self.bounds
        return x0 <= rect[0] + tol and x1 >= rect[1] - tol and y0 <= rect[2] + tol and y1 >= rect[3] - tol

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        x0, x1, y0, y1 = self.bounds
        pts = np.stack([np.clip(x, x0, x1), np.clip(y, y0, y1)], axis=-1).reshape(-1, 2)
        return self._interp(pts).reshape(x.shape)

    @classmethod
    def from_function(cls, g: Callable, rect: Rect, nx: int, ny: int | None = None) -> "MeasuredField":
        ny = nx if ny is None else ny
        x = np.linspace(rect[0], rect[1], nx + 1)
        y = np.linspace(rect[2], rect[3], ny + 1)
        X, Y = np.meshgrid(x, y, indexing="ij")
        return cls(x, y, np.asarray(g(X, Y), dtype=float) * np.ones_like(X))

    @classmethod
    def from_structured(cls, mesh: Mesh, values) -> "MeasuredField":
        """Wrap nodal values of a structured mesh (vertex index j*(nx+1)+i)."""
        if mesh.shape is None:
            raise InvalidArgumentError("mesh is not structured")
        nx, ny = mesh.shape
        vals = fem.nodal_values(values).reshape(ny + 1, nx + 1).T
        x0, x1, y0, y1 = mesh.domain
        return cls(np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1), vals)

    def to_csv(self, path) -> None:
        """Write ``x,y,value`` rows, x varying fastest."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "value"])
            for j, yj in enumerate(self.y):
                for i, xi in enumerate(self.x):
                    w.writerow([repr(float(xi)), repr(float(yj)), repr(float(self.values[i, j]))])

    @classmethod
    def from_csv(cls, path) -> "MeasuredField":
        """Read ``x,y,value`` rows covering a full tensor grid (any row order)."""
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != 3:
            raise InvalidArgumentError(f"{path}: expected three columns x,y,value")
        x, ix = np.unique(data[:, 0], return_inverse=True)
        y, iy = np.unique(data[:, 1], return_inverse=True)
        if len(data) != len(x) * len(y):
            raise InvalidArgumentError(f"{path}: rows do not form a complete {len(x)} x {len(y)} grid")
        vals = np.full((len(x), len(y)), np.nan)
        vals[ix, iy] = data[:, 2]
        if np.isnan(vals).any():
            raise InvalidArgumentError(f"{path}: duplicate grid points")
        return cls(x, y, vals)


def _noise(mesh: Mesh, amplitude: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-amplitude, amplitude, mesh.num_nodes)


def perturb(data, spec: PerturbationSpec, mesh: Mesh, dofmap: DofMap | None = None) -> FieldP1:
    """Perturbed nodal data on ``mesh``.

    ``data`` is a callable (interpolated at the nodes) or a P1 field.
    """
    dofmap = dofmap or DofMap.from_mesh(mesh)
    if spec.kind == "coarse_sampling":
        if not callable(data):
            raise InvalidArgumentError("coarse_sampling needs the exact data as a callable")
        x0, x1, y0, y1 = mesh.domain
        nx = max(1, int(round((x1 - x0) / spec.coarse_h)))
        ny = max(1, int(round((y1 - y0) / spec.coarse_h)))
        coarse = MeasuredField.from_function(data, mesh.domain, nx, ny)
        return fem.interpolate(mesh, coarse, dofmap)
    if spec.kind == "unfitted_substitute":
        raise InvalidArgumentError("unfitted_substitute data comes from make_unfitted_data")
    base = fem.interpolate(mesh, data, dofmap).values if callable(data) else fem.nodal_values(data).copy()
    if spec.kind == "uniform_noise" and spec.amplitude > 0:
        base = base + _noise(mesh, spec.amplitude, spec.seed)
    elif spec.kind == "h_scaled_noise" and spec.coefficient > 0:
        base = base + _noise(mesh, spec.coefficient * mesh.h_global, spec.seed)
    return FieldP1(base, dofmap)


def _on_grid_line(value: float, n: int) -> bool:
    return abs(value * n - round(value * n)) < 1e-9


def make_unfitted_data(source: Callable, nx_fitted: int = 120, nx_unfitted: int = 110,
                       rect: Rect = (0.0, 1.0, 0.0, 1.0), rule=SOURCE_RULE):
    """Fine P1 Dirichlet-Poisson solutions of ``-Laplace(u) = source``.

    The fitted mesh has grid lines on x, y = 1/3, 2/3 (the discontinuities of
    the cross source), the unfitted one does not. Returns
    ``(fitted, unfitted, perturbation)`` where the last entry is the L2 norm
    of their difference on the fitted mesh. ``rule`` integrates the source
    against the hat functions.
    """
    if rect != (0.0, 1.0, 0.0, 1.0):
        raise InvalidArgumentError("fitted/unfitted data is defined on the unit square")
    if not (_on_grid_line(1 / 3, nx_fitted) and _on_grid_line(2 / 3, nx_fitted)):
        raise InvalidArgumentError(f"fitted resolution {nx_fitted} must be divisible by 3")
    if _on_grid_line(1 / 3, nx_unfitted) or _on_grid_line(2 / 3, nx_unfitted):
        raise InvalidArgumentError(f"unfitted resolution {nx_unfitted} puts grid lines on 1/3 or 2/3")
    fields = []
    for n in (nx_fitted, nx_unfitted):
        m = generate_structured(n, n, rect)
        fields.append((m, MeasuredField.from_structured(m, fem.solve_poisson(m, fem.load_vector(m, source, rule=rule)))))
    (mf, fitted), (_, unfitted) = fields
    pts, w = fem.quadrature_points(mf, DATA_RULE)
    diff = fitted(pts[..., 0], pts[..., 1]) - unfitted(pts[..., 0], pts[..., 1])
    return fitted, unfitted, float(np.sqrt(np.sum(w * diff**2)))
