"""Run convergence sweeps described by an :class:`ExperimentConfig`."""

from __future__ import annotations

import logging
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import analysis, fem, problems
from ..analysis import ConvergenceReport, ErrorRecord
from ..errors import StabFEMError
from ..fem import DofMap
from ..mesh import build_faces, generate_structured, square, tag_region
from .catalog import MEASUREMENT, ExactCase, exact_catalog
from .config import ExperimentConfig, Variant
from .perturb import PerturbationSpec, make_unfitted_data, perturb

logger = logging.getLogger(__name__)


def _prefix(variant: Variant) -> str:
    return f"{variant.label}:" if variant.label else ""


def _level_seed(cfg: ExperimentConfig, spec: PerturbationSpec, level: int) -> int:
    """Independent, reproducible noise stream per (run seed, spec seed, level)."""
    return int(np.random.SeedSequence([cfg.seed, spec.seed, level]).generate_state(1)[0])


class _Level:
    """Mesh, faces and assembled helpers shared by the variants of one level."""

    def __init__(self, case: ExactCase, index: int, side: int):
        self.index = index
        self.mesh = generate_structured(side, side, case.domain)
        self.faces = build_faces(self.mesh)
        self.dofmap = DofMap.from_mesh(self.mesh)
        self._s1 = self._s5 = None

    @property
    def s1(self):
        if self._s1 is None:
            self._s1 = fem.jump_stabilization(self.mesh, self.faces, 1, 1.0)
        return self._s1

    @property
    def s5(self):
        if self._s5 is None:
            self._s5 = fem.jump_stabilization(self.mesh, self.faces, 5, 1.0)
        return self._s5


class _DataSources:
    """Lazily built measured data shared by all levels."""

    def __init__(self, cfg: ExperimentConfig, case: ExactCase):
        self.cfg, self.case = cfg, case
        self._unfitted = None

    def unfitted_pair(self):
        if self._unfitted is None:
            spec = self.cfg.perturbation
            nf, nu = (spec.nx_fitted, spec.nx_unfitted) if spec.kind == "unfitted_substitute" else (120, 110)
            self._unfitted = make_unfitted_data(self.case.q, nf, nu, self.case.domain)
        return self._unfitted

    def data(self, settings: dict, level: _Level, exact):
        """Measured data for one solve: a callable or a P1 field."""
        source = settings["data"]
        spec: PerturbationSpec = settings["perturbation"]
        if source == "fitted":
            return self.unfitted_pair()[0]
        if source == "unfitted":
            return self.unfitted_pair()[1]
        if spec.kind in ("none", "unfitted_substitute"):
            return exact if source == "exact" else fem.interpolate(level.mesh, exact, level.dofmap)
        spec = replace(spec, seed=_level_seed(self.cfg, spec, level.index))
        return perturb(exact, spec, level.mesh, level.dofmap)


def _da_columns(cfg, case, level, variant, settings, sources, norms):
    mesh = level.mesh
    m_region = tag_region(mesh, case.regions.get("M", MEASUREMENT), "M")
    dcfg = problems.DAConfig(
        region=m_region,
        data=sources.data(settings, level, case.u),
        source=case.q,
        gamma=settings["gamma"],
        tikhonov_alpha=settings["alpha"],
        allow_unstabilized=True,
    )
    sol = problems.solve_da(mesh, dcfg, level.faces, level.dofmap)
    errors = {}
    for d in cfg.distances:
        key = f"l2_d{d:g}"
        if key in norms:
            region = tag_region(mesh, square((0.0, 0.0), 0.25 + d), key)
            errors[key] = analysis.l2_error(mesh, sol.u, case.u, region)
    stiff = fem.stiffness_matrix(mesh)
    if "lam_h1" in norms:
        errors["lam_h1"] = analysis.seminorm(stiff, sol.lam)
    monitors = {
        "grad_uh": analysis.seminorm(stiff, sol.u),
        "s1_uh": analysis.seminorm(level.s1, sol.u) ** 2,
        "residual": sol.residual,
    }
    return errors, monitors


def _sr_columns(cfg, case, level, variant, settings, sources, norms):
    mesh = level.mesh
    mode = settings["mode"]
    beta = settings["beta"]
    if mode == "tikhonov_h1" and beta is None:
        beta = settings["gamma5"] * mesh.h_global**4
    scfg = problems.SRConfig(
        data=sources.data(settings, level, case.u if case.u is not None else None),
        gamma1=settings["gamma"],
        gamma5=settings["gamma5"],
        mode=mode,
        alpha=settings["alpha"] if mode == "tikhonov_l2" else 0.0,
        beta=beta if mode == "tikhonov_h1" else 0.0,
    )
    sol = problems.solve_sr(mesh, scfg, level.faces, level.dofmap)
    errors = {}
    if "q_l2" in norms:
        errors["q_l2"] = analysis.l2_error(mesh, sol.q, case.q)
    if "u_h1" in norms:
        errors["u_h1"] = analysis.h1_seminorm_error(mesh, sol.u, case.grad_u)
    if "u_l2" in norms:
        errors["u_l2"] = analysis.l2_error(mesh, sol.u, case.u)
    if "q_hm1" in norms:
        errors["q_hm1"] = analysis.hminus1_error(mesh, sol.q, case.q)
    stiff = fem.stiffness_matrix(mesh)
    qn = sol.q.nodal
    monitors = {
        "grad_uh": analysis.seminorm(stiff, sol.u),
        "qh_l2": analysis.seminorm(fem.mass_matrix(mesh), sol.q),
        "s1_uh": analysis.seminorm(level.s1, sol.u) ** 2,
        "s5_qh": analysis.seminorm(level.s5, sol.q) ** 2,
        "qh_boundary_mean": float(np.mean(np.abs(qn[level.dofmap.boundary]))),
        "residual": sol.residual,
    }
    return errors, monitors


def _diagnostic_columns(cfg, case, level, variant, settings, sources, norms):
    mesh, faces = level.mesh, level.faces
    region = tag_region(mesh, MEASUREMENT, "M")
    errors = {}
    if "poincare" in norms:
        errors["poincare"] = analysis.diagnose_poincare(mesh, faces, region, cfg.samples, cfg.seed)
    if "poincare_raw" in norms:
        errors["poincare_raw"] = analysis.diagnose_poincare(mesh, faces, region, cfg.samples, cfg.seed,
                                                            iterations=0)
    if "neq_min" in norms or "neq_max" in norms:
        lo, hi = analysis.diagnose_norm_equivalence(mesh, faces, cfg.samples, cfg.seed)
        errors.update({k: v for k, v in (("neq_min", lo), ("neq_max", hi)) if k in norms})
    return errors, {}


_RUNNERS = {"da": _da_columns, "sr": _sr_columns, "diagnostics": _diagnostic_columns}


def default_norms(cfg: ExperimentConfig) -> tuple[str, ...]:
    if cfg.norms:
        return cfg.norms
    if cfg.problem == "sr" and cfg.case == "cross":
        return ("q_l2",)
    if cfg.problem == "sr":
        return ("q_l2", "u_h1")
    return cfg.known_norms()


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ConvergenceReport:
    """One solve per mesh level and variant; failures are recorded, never raised.

    With ``out_dir`` the report files are written there as well.
    """
    case = exact_catalog(cfg.case)
    norms = default_norms(cfg)
    sources = _DataSources(cfg, case)
    runner = _RUNNERS[cfg.problem]
    records = []
    meta = {"problem": cfg.problem, "case": cfg.case, "seed": str(cfg.seed)}
    for index, side in enumerate(cfg.sides):
        try:
            level = _Level(case, index, int(side))
        except StabFEMError as exc:
            logger.warning("level %d (side %d) failed: %s", index, side, exc)
            rec = ErrorRecord(index, (int(side) + 1) ** 2, math.nan, status=f"failed: {exc}")
            records.append(rec)
            continue
        rec = ErrorRecord(index, level.mesh.num_nodes, level.mesh.h_global)
        failures = []
        for variant in cfg.variants:
            pre = _prefix(variant)
            settings = cfg.settings(variant)
            try:
                errors, monitors = runner(cfg, case, level, variant, settings, sources, norms)
            except (StabFEMError, np.linalg.LinAlgError, MemoryError) as exc:
                logger.warning("level %d variant %r failed: %s", index, variant.label, exc)
                failures.append(f"{variant.label or 'solve'}: {type(exc).__name__}: {exc}")
                errors = {n: math.nan for n in norms}
                monitors = {}
            for k in norms:
                rec.errors[pre + k] = errors.get(k, math.nan)
            for k, v in monitors.items():
                rec.seminorms[pre + k] = v
        if failures:
            rec.status = "failed: " + "; ".join(failures)
        logger.info("level %d (side %d, %d nodes): %s", index, side, rec.nodes, rec.errors)
        records.append(rec)
    if sources._unfitted is not None:
        meta["data_perturbation_l2"] = repr(sources._unfitted[2])
    report = ConvergenceReport(cfg.name, records, cfg.convention, meta)
    if out_dir is not None:
        from .report import emit_report

        emit_report(report, Path(out_dir))
    return report


def variant_prefixes(cfg: ExperimentConfig) -> list[str]:
    return [_prefix(v) for v in cfg.variants]

