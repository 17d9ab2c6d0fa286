"""Exact solutions and data of the benchmark problems."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import InvalidArgumentError
from ..mesh import Rect, square
from ..problems import RadialProfile

MEASUREMENT = square((0.0, 0.0), 0.25)
DA_DISTANCES = (0.0, 0.1875, 0.375, 0.625)


@dataclass(frozen=True)
class ExactCase:
    """Analytic state ``u`` (with gradient) and source ``q`` on ``domain``.

    ``u`` and ``grad_u`` are None when no closed form is known.
    """

    name: str
    u: Callable | None
    grad_u: Callable | None
    q: Callable
    domain: Rect
    regions: dict[str, Rect] = field(default_factory=dict)


def _da_u(x, y):
    return (x + 1) ** 2 * (x - 1) * (y + 1) * (y - 1) ** 2


def _da_grad(x, y):
    X, Y = (x + 1) ** 2 * (x - 1), (y + 1) * (y - 1) ** 2
    return (x + 1) * (3 * x - 1) * Y, X * (y - 1) * (3 * y + 1)


def _da_f(x, y):
    X, Y = (x + 1) ** 2 * (x - 1), (y + 1) * (y - 1) ** 2
    return -((6 * x + 2) * Y + X * (6 * y - 2))


def _smooth_u(x, y):
    return (x * x - 1) * (y * y - 1)


def _smooth_grad(x, y):
    return 2 * x * (y * y - 1), 2 * y * (x * x - 1)


def _smooth_q(x, y):
    return 2 * (2 - x * x - y * y)


def cross_source(x, y):
    """Indicator sum of the horizontal and vertical middle strips of (0, 1)^2."""
    x, y = np.asarray(x), np.asarray(y)
    return ((x > 1 / 3) & (x < 2 / 3)).astype(float) + ((y > 1 / 3) & (y < 2 / 3)).astype(float)


def da_regions() -> dict[str, Rect]:
    """Measurement square and the evaluation squares at the tabulated distances."""
    regions = {"M": MEASUREMENT}
    for d in DA_DISTANCES:
        regions[f"d{d:g}"] = square((0.0, 0.0), 0.25 + d)
    return regions


def _build(name: str) -> ExactCase:
    if name == "da":
        return ExactCase(name, _da_u, _da_grad, _da_f, (-1.0, 1.0, -1.0, 1.0), da_regions())
    if name == "sr_smooth":
        return ExactCase(name, _smooth_u, _smooth_grad, _smooth_q, (-1.0, 1.0, -1.0, 1.0))
    if name == "sr_nonsmooth":
        prof = RadialProfile(0.25, 0.75)
        return ExactCase(name, prof.u, prof.grad_u, prof.q, (-1.0, 1.0, -1.0, 1.0))
    if name == "cross":
        return ExactCase(name, None, None, cross_source, (0.0, 1.0, 0.0, 1.0))
    raise InvalidArgumentError(f"unknown case {name!r}, expected one of {CASES}")


CASES = ("da", "sr_smooth", "sr_nonsmooth", "cross")


def exact_catalog(name: str) -> ExactCase:
    """Look up a benchmark case by name."""
    return _build(name)
