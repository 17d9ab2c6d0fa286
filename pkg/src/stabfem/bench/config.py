"""Experiment configurations, compiled-in presets and the INI loader.

Config files are INI (``configparser``; ``;`` and ``#`` start comments, also
inline) with one ``[experiment]`` section, an optional ``[perturbation]``
section and any number of ``[variant NAME]`` sections. Keys of
``[experiment]``:

    preset       start from a named preset (optional)
    name         report name
    problem      da | sr | diagnostics
    case         da | sr_smooth | sr_nonsmooth | cross
    sides        comma-separated cells per domain side, one level each
    gamma        DA weight of s_1, SR weight gamma_1
    gamma5       SR weight of s_5
    mode         jump | tikhonov_l2 | tikhonov_h1 | none
    alpha        DA gradient penalty, SR zero-order Tikhonov weight
    beta         SR gradient Tikhonov weight (omit for gamma5 * h^4)
    distances    DA evaluation distances from the measurement square
    data         exact | interpolant | fitted | unfitted
    norms        comma-separated error columns to record
    convention   h_global | h_nodes
    seed         RNG seed of the perturbation
    samples      diagnostics sample count

``[perturbation]`` holds the fields of :class:`PerturbationSpec`. A
``[variant NAME]`` section may override gamma, gamma5, mode, alpha, beta,
data and the perturbation keys (kind, amplitude, coefficient, coarse_h).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..errors import InvalidArgumentError
from ..problems import SR_MODES
from .catalog import CASES, DA_DISTANCES
from .perturb import PerturbationSpec

PROBLEMS = ("da", "sr", "diagnostics")
DATA_SOURCES = ("exact", "interpolant", "fitted", "unfitted")
CONVENTIONS = ("h_global", "h_nodes")

DA_NORMS = ("l2_d0", "l2_d0.1875", "l2_d0.375", "l2_d0.625", "lam_h1")
SR_NORMS = ("q_l2", "u_h1", "u_l2", "q_hm1")
DIAGNOSTIC_NORMS = ("poincare", "poincare_raw", "neq_min", "neq_max")


@dataclass(frozen=True)
class Variant:
    """Solver settings that differ between columns of one sweep.

    ``None`` fields inherit the experiment value.
    """

    label: str = ""
    gamma: float | None = None
    gamma5: float | None = None
    mode: str | None = None
    alpha: float | None = None
    beta: float | None = None
    data: str | None = None
    perturbation: PerturbationSpec | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    problem: str
    case: str
    sides: tuple[int, ...]
    gamma: float = 1e-4
    gamma5: float = 1e-4
    mode: str = "jump"
    alpha: float = 0.0
    beta: float | None = None
    distances: tuple[float, ...] = ()
    data: str = "exact"
    norms: tuple[str, ...] = ()
    convention: str = "h_global"
    seed: int = 0
    samples: int = 200
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    variants: tuple[Variant, ...] = (Variant(),)

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise InvalidArgumentError(f"unknown problem kind {self.problem!r}, expected one of {PROBLEMS}")
        if self.case not in CASES:
            raise InvalidArgumentError(f"unknown case {self.case!r}, expected one of {CASES}")
        if not self.sides or any(int(s) < 1 for s in self.sides):
            raise InvalidArgumentError("sides must be a nonempty list of positive cell counts")
        if self.convention not in CONVENTIONS:
            raise InvalidArgumentError(f"unknown convention {self.convention!r}")
        if self.problem == "da" and self.case != "da":
            raise InvalidArgumentError("data assimilation runs use the 'da' case")
        if self.problem == "sr" and self.case == "da":
            raise InvalidArgumentError("the 'da' case has no source reconstruction setup")
        if not self.variants:
            raise InvalidArgumentError("at least one variant is required")
        labels = [v.label for v in self.variants]
        if len(set(labels)) != len(labels):
            raise InvalidArgumentError(f"duplicate variant labels {labels}")
        for v in self.variants:
            s = self.settings(v)
            if s["mode"] not in SR_MODES:
                raise InvalidArgumentError(f"unknown mode {s['mode']!r}")
            if s["data"] not in DATA_SOURCES:
                raise InvalidArgumentError(f"unknown data source {s['data']!r}")
            if s["data"] in ("fitted", "unfitted") and self.case != "cross":
                raise InvalidArgumentError("fitted/unfitted data exists only for the cross case")
            if min(s["gamma"], s["gamma5"], s["alpha"]) < 0 or (s["beta"] is not None and s["beta"] < 0):
                raise InvalidArgumentError("weights must be nonnegative")
        for n in self.norms:
            if n not in self.known_norms():
                raise InvalidArgumentError(f"norm {n!r} is not available for problem {self.problem}")
            if self.case == "cross" and n.startswith("u_"):
                raise InvalidArgumentError(f"norm {n!r} needs an exact state, which the cross case lacks")

    def known_norms(self) -> tuple[str, ...]:
        if self.problem == "da":
            return tuple(f"l2_d{d:g}" for d in self.distances) + ("lam_h1",)
        if self.problem == "sr":
            return SR_NORMS
        return DIAGNOSTIC_NORMS

    def settings(self, variant: Variant) -> dict:
        """Effective solver settings of one variant."""
        out = {}
        for key in ("gamma", "gamma5", "mode", "alpha", "beta", "data", "perturbation"):
            val = getattr(variant, key)
            out[key] = getattr(self, key) if val is None else val
        return out

    def with_levels(self, levels: int) -> "ExperimentConfig":
        if levels < 1:
            raise InvalidArgumentError("levels must be >= 1")
        return replace(self, sides=self.sides[:levels])


def _g5(g):
    return Variant(label=f"g5={g:.0e}", gamma5=g)


PRESETS: dict[str, ExperimentConfig] = {
    "table1": ExperimentConfig(
        name="table1", problem="da", case="da", sides=(32, 64, 128, 288), gamma=1e-4,
        distances=DA_DISTANCES, norms=DA_NORMS[:4], convention="h_nodes",
    ),
    "da_unstabilized": ExperimentConfig(
        name="da_unstabilized", problem="da", case="da", sides=(32, 64, 128), distances=DA_DISTANCES,
        norms=DA_NORMS, variants=(Variant("stabilized", gamma=1e-4), Variant("unstabilized", gamma=0.0)),
    ),
    "sr_smooth": ExperimentConfig(
        name="sr_smooth", problem="sr", case="sr_smooth", sides=(16, 32, 64, 128, 256), gamma=0.0,
        norms=("q_l2", "u_h1"), variants=tuple(_g5(g) for g in (1e-2, 1e-4, 1e-6)),
    ),
    "sr_nonsmooth": ExperimentConfig(
        name="sr_nonsmooth", problem="sr", case="sr_nonsmooth", sides=(16, 32, 64, 128), gamma=0.0,
        gamma5=1e-4, norms=("q_l2", "u_h1"),
    ),
    "sr_perturbed": ExperimentConfig(
        name="sr_perturbed", problem="sr", case="sr_smooth", sides=(8, 16, 32, 64, 128, 256), gamma=0.0,
        gamma5=1e-4, data="interpolant", norms=("u_h1", "q_l2"), seed=1,
        variants=(
            Variant("constant", perturbation=PerturbationSpec("uniform_noise", amplitude=0.05, seed=1)),
            Variant("scaled", perturbation=PerturbationSpec("h_scaled_noise", coefficient=0.01, seed=1)),
        ),
    ),
    "sr_tikhonov": ExperimentConfig(
        name="sr_tikhonov", problem="sr", case="sr_smooth", sides=(32, 64, 128), gamma=0.0, gamma5=1e-4,
        norms=("q_l2", "u_h1"),
        variants=(
            Variant("jump", mode="jump"),
            Variant("tikhonov_l2", mode="tikhonov_l2", alpha=1e-4),
            Variant("tikhonov_h1", mode="tikhonov_h1"),
        ),
    ),
    "stab_vs_unstab": ExperimentConfig(
        name="stab_vs_unstab", problem="sr", case="cross", sides=(20, 30, 40, 60, 80, 100), gamma=1e-6,
        gamma5=1e-6, norms=("q_l2",),
        perturbation=PerturbationSpec("unfitted_substitute", nx_fitted=120, nx_unfitted=110),
        variants=(
            Variant("stab_fitted", data="fitted"),
            Variant("stab_unfitted", data="unfitted"),
            Variant("unstab_fitted", gamma=0.0, gamma5=0.0, mode="none", data="fitted"),
            Variant("unstab_unfitted", gamma=0.0, gamma5=0.0, mode="none", data="unfitted"),
        ),
    ),
    "diagnostics": ExperimentConfig(
        name="diagnostics", problem="diagnostics", case="da", sides=(64, 128, 256), norms=DIAGNOSTIC_NORMS,
    ),
}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown preset {name!r}, expected one of {sorted(PRESETS)}") from None


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _names(text: str) -> tuple[str, ...]:
    return tuple(t for t in text.replace(",", " ").split())


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


_EXPERIMENT_KEYS = {
    "name": str,
    "problem": str,
    "case": str,
    "sides": lambda t: tuple(int(v) for v in _floats(t)),
    "gamma": float,
    "gamma5": float,
    "mode": str,
    "alpha": float,
    "beta": _optional_float,
    "distances": _floats,
    "data": str,
    "norms": _names,
    "convention": str,
    "seed": int,
    "samples": int,
}
_PERT_PARSE = {"kind": str, "amplitude": float, "coefficient": float, "coarse_h": float,
               "nx_fitted": int, "nx_unfitted": int, "seed": int}


def _parse_perturbation(section, base: PerturbationSpec | None) -> PerturbationSpec:
    kw = {}
    for key, raw in section.items():
        if key not in _PERT_PARSE:
            raise InvalidArgumentError(f"unknown perturbation key {key!r}")
        kw[key] = _PERT_PARSE[key](raw)
    return replace(base or PerturbationSpec(), **kw)


def load_config(path) -> ExperimentConfig:
    """Read an INI experiment description."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from exc
    if "experiment" not in parser:
        raise InvalidArgumentError(f"{path}: missing [experiment] section")
    exp = dict(parser["experiment"])
    base = preset(exp.pop("preset")) if "preset" in exp else None
    kw = {}
    for key, raw in exp.items():
        if key not in _EXPERIMENT_KEYS:
            raise InvalidArgumentError(f"{path}: unknown experiment key {key!r}")
        kw[key] = _EXPERIMENT_KEYS[key](raw)
    if "perturbation" in parser:
        kw["perturbation"] = _parse_perturbation(parser["perturbation"], base.perturbation if base else None)
    variants = []
    for sec in parser.sections():
        if not sec.startswith("variant"):
            continue
        label = sec[len("variant"):].strip()
        vkw: dict = {"label": label}
        pert = {}
        for key, raw in parser[sec].items():
            if key in ("gamma", "gamma5", "alpha"):
                vkw[key] = float(raw)
            elif key == "beta":
                vkw[key] = _optional_float(raw)
            elif key in ("mode", "data"):
                vkw[key] = raw
            elif key in _PERT_PARSE:
                pert[key] = raw
            else:
                raise InvalidArgumentError(f"{path}: unknown variant key {key!r}")
        if pert:
            vkw["perturbation"] = _parse_perturbation(pert, None)
        variants.append(Variant(**vkw))
    if variants:
        kw["variants"] = tuple(variants)
    try:
        if base is not None:
            return replace(base, **kw)
        for required in ("problem", "case", "sides"):
            if required not in kw:
                raise InvalidArgumentError(f"{path}: [experiment] needs {required!r} or a preset")
        kw.setdefault("name", path.stem)
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from exc
