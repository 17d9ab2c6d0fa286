"""Stabilized P1 finite elements for ill-posed elliptic control problems."""

from .errors import (
    InsufficientDataError,
    InvalidArgumentError,
    InvalidMeshError,
    RegionUnresolvedError,
    SolverError,
    StabFEMError,
)
from .fem import V, V0, DofMap, FieldP1
from .mesh import FaceSet, Mesh, RegionTag, build_faces, generate_structured, refine_family, tag_region
from .problems import DAConfig, SRConfig, solve_da, solve_sr

__version__ = "0.1.0"

__all__ = [
    "DAConfig",
    "DofMap",
    "FaceSet",
    "FieldP1",
    "InsufficientDataError",
    "InvalidArgumentError",
    "InvalidMeshError",
    "Mesh",
    "RegionTag",
    "RegionUnresolvedError",
    "SRConfig",
    "SolverError",
    "StabFEMError",
    "V",
    "V0",
    "build_faces",
    "generate_structured",
    "refine_family",
    "solve_da",
    "solve_sr",
    "tag_region",
]
