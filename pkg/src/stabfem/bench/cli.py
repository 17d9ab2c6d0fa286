"""Command line entry point: ``stabfem-bench run|list-presets|verify``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import fem, linalg, problems
from ..errors import StabFEMError
from ..fem import DATA_RULE
from ..mesh import build_faces, generate_structured, tag_region
from . import oracles
from .catalog import exact_catalog
from .config import PRESETS, ExperimentConfig, load_config, preset
from .experiments import run_experiment


def resolve_config(target: str) -> ExperimentConfig:
    """A preset name or the path of an INI file."""
    if target in PRESETS:
        return preset(target)
    path = Path(target)
    if path.is_file():
        return load_config(path)
    raise StabFEMError(f"{target!r} is neither a preset ({', '.join(sorted(PRESETS))}) nor a config file")


def apply_overrides(cfg: ExperimentConfig, seed=None, levels=None, gamma=None, gamma5=None) -> ExperimentConfig:
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if levels is not None:
        cfg = cfg.with_levels(levels)
    if gamma is not None or gamma5 is not None:
        # the override applies to the sweep default and to every variant that set it
        variants = tuple(
            replace(v, gamma=gamma if gamma is not None and v.gamma is not None else v.gamma,
                    gamma5=gamma5 if gamma5 is not None and v.gamma5 is not None else v.gamma5)
            for v in cfg.variants
        )
        cfg = replace(cfg, gamma=cfg.gamma if gamma is None else gamma,
                      gamma5=cfg.gamma5 if gamma5 is None else gamma5, variants=variants)
    return cfg


# -- verify -------------------------------------------------------------------

def _check_quadrature():
    worst = 0.0
    p = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    pts = DATA_RULE.points @ p
    for a in range(DATA_RULE.degree + 1):
        for b in range(DATA_RULE.degree + 1 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            approx = 0.5 * np.sum(DATA_RULE.weights * pts[:, 0] ** a * pts[:, 1] ** b)
            worst = max(worst, abs(approx - exact))
    return worst < 1e-14, f"max monomial error {worst:.1e}"


def _check_matrices():
    mesh = generate_structured(4, 4, (-1.0, 1.0, -1.0, 1.0))
    faces = build_faces(mesh)
    region = tag_region(mesh, (-0.5, 0.5, -0.5, 0.5))
    pairs = [
        ("mass", fem.mass_matrix(mesh), oracles.dense_mass(mesh)),
        ("mass_region", fem.mass_matrix(mesh, region), oracles.dense_mass(mesh, region.mask)),
        ("stiffness", fem.stiffness_matrix(mesh), oracles.dense_stiffness(mesh)),
    ] + [(f"s{i}", fem.jump_stabilization(mesh, faces, i, 1.0), oracles.dense_jump(mesh, i)) for i in (1, 3, 5)]
    worst = max(np.max(np.abs(a.toarray() - b)) for _, a, b in pairs)
    return worst < 1e-12, f"max entry difference {worst:.1e} over {', '.join(n for n, _, _ in pairs)}"


def _check_da_affine():
    mesh = generate_structured(8, 8, (-1.0, 1.0, -1.0, 1.0))
    sol = problems.solve_da(mesh, problems.DAConfig((-0.25, 0.25, -0.25, 0.25), lambda x, y: x, None, 1e-4))
    err = np.max(np.abs(sol.u.nodal - mesh.vertices[:, 0]))
    return err < 1e-9 and np.max(np.abs(sol.lam.values)) < 1e-9, f"max nodal error {err:.1e}"


def _check_sr_zero():
    mesh = generate_structured(8, 8, (-1.0, 1.0, -1.0, 1.0))
    sol = problems.solve_sr(mesh, problems.SRConfig(data=None))
    ok = not (np.any(sol.u.values) or np.any(sol.q.values) or np.any(sol.lam.values))
    return ok, "zero data gives zero fields" if ok else "nonzero output for zero data"


def _check_dense_solve():
    mesh = generate_structured(4, 4, (-1.0, 1.0, -1.0, 1.0))
    u = exact_catalog("da")
    system = problems.assemble_da(mesh, problems.DAConfig((-0.5, 0.5, -0.5, 0.5), u.u, u.q, 1e-4))
    matrix, rhs = system.assemble()
    x_sparse = linalg.solve(matrix, rhs)
    x_dense = linalg.dense_solve(matrix, rhs)
    diff = np.linalg.norm(x_sparse - x_dense) / np.linalg.norm(x_dense)
    return diff < 1e-8, f"relative difference {diff:.1e}"


def _check_catalog():
    case = exact_catalog("da")
    x, y, h = 0.3, -0.45, 1e-3
    lap = (case.u(x + h, y) + case.u(x - h, y) + case.u(x, y + h) + case.u(x, y - h) - 4 * case.u(x, y)) / h**2
    diff = abs(-lap - case.q(x, y))
    return diff < 1e-5, f"finite-difference Laplacian mismatch {diff:.1e}"


CHECKS = {
    "quadrature": _check_quadrature,
    "matrix_oracles": _check_matrices,
    "da_affine": _check_da_affine,
    "sr_zero": _check_sr_zero,
    "dense_solve": _check_dense_solve,
    "catalog_laplacian": _check_catalog,
}


def verify(out=None) -> bool:
    out = out or sys.stdout
    ok_all = True
    for name, check in CHECKS.items():
        try:
            ok, detail = check()
        except Exception as exc:  # report and continue with the remaining checks
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= bool(ok)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=out)
    return ok_all


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stabfem-bench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-level progress")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a preset or an INI config")
    run.add_argument("target", help="preset name or config path")
    run.add_argument("--out", default=None, help="output directory (default: ./results/<name>)")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--levels", type=int, default=None, help="use only the first N mesh levels")
    run.add_argument("--gamma", type=float, default=None, help="DA gamma or SR gamma_1")
    run.add_argument("--gamma5", type=float, default=None, help="SR gamma_5")
    sub.add_parser("list-presets", help="list compiled-in presets")
    sub.add_parser("verify", help="run the oracle and consistency checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "list-presets":
            for name, cfg in PRESETS.items():
                sides = ",".join(str(s) for s in cfg.sides)
                labels = ",".join(v.label for v in cfg.variants if v.label) or "-"
                print(f"{name:16s} problem={cfg.problem:11s} case={cfg.case:12s} sides={sides:22s} variants={labels}")
            return 0
        if args.command == "verify":
            return 0 if verify() else 1
        cfg = apply_overrides(resolve_config(args.target), args.seed, args.levels, args.gamma, args.gamma5)
        out = Path(args.out) if args.out else Path("results") / cfg.name
        report = run_experiment(cfg, out)
        failed = [r for r in report.records if r.status != "ok"]
        print(f"wrote {out / 'report.csv'} ({len(report.records)} levels, {len(failed)} with failures)")
        return 0
    except (StabFEMError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
