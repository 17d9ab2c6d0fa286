"""CSV, markdown and plot-data output of convergence reports."""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

from ..analysis import ConvergenceReport, ErrorRecord, pair_flags, rate
from ..errors import InvalidArgumentError

FIXED = ("level", "nodes", "h_nodes", "h_global")


def _fmt(x: float) -> str:
    return repr(float(x))


def _prefixes(report: ConvergenceReport) -> list[str]:
    seen: list[str] = []
    for name in report.error_names + report.seminorm_names:
        pre = name.rsplit(":", 1)[0] + ":" if ":" in name else ""
        if pre not in seen:
            seen.append(pre)
    return seen


def _flag_text(report: ConvergenceReport, k: int) -> str:
    if k == 0:
        return ""
    parts = []
    for pre in _prefixes(report):
        flags = pair_flags(report.records[k - 1], report.records[k], pre)
        if flags is not None:
            parts.append(f"{pre}c1={int(flags[0])} c2={int(flags[1])}")
    return ";".join(parts)


def rate_columns(report: ConvergenceReport) -> dict[str, list[float]]:
    """Rate into each level from the previous one (NaN on the first level)."""
    out = {}
    hs = report.h()
    for name in report.error_names:
        e = report.column(name)
        out[name] = [math.nan] + [rate(e[k - 1], e[k], hs[k - 1], hs[k]) for k in range(1, len(e))]
    return out


def write_csv(report: ConvergenceReport, path) -> None:
    errors, semis = report.error_names, report.seminorm_names
    if not errors:
        raise InvalidArgumentError("report has no error columns")
    rates = rate_columns(report)
    header = list(FIXED) + errors + semis + [f"rate_{n}" for n in errors] + ["flags", "status"]
    meta = {"name": report.name, "convention": report.convention, "errors": len(errors),
            "seminorms": len(semis), "meta": report.meta}
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, r in enumerate(report.records):
            row = [str(r.level), str(r.nodes), _fmt(r.h_nodes), _fmt(r.h_global)]
            row += [_fmt(r.errors.get(n, math.nan)) for n in errors]
            row += [_fmt(r.seminorms.get(n, math.nan)) for n in semis]
            row += [_fmt(rates[n][k]) for n in errors]
            row += [_flag_text(report, k), r.status]
            w.writerow(row)


def read_csv(path) -> ConvergenceReport:
    """Parse a report written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise InvalidArgumentError(f"{path}: missing report comment line")
        meta = json.loads(first[2:])
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    ne, ns = meta["errors"], meta["seminorms"]
    err_names = header[len(FIXED):len(FIXED) + ne]
    sem_names = header[len(FIXED) + ne:len(FIXED) + ne + ns]
    records = []
    for row in body:
        vals = row[len(FIXED):]
        r = ErrorRecord(
            level=int(row[0]),
            nodes=int(row[1]),
            h_global=float(row[3]),
            errors={n: float(v) for n, v in zip(err_names, vals[:ne])},
            seminorms={n: float(v) for n, v in zip(sem_names, vals[ne:ne + ns])},
            status=row[-1],
        )
        records.append(r)
    return ConvergenceReport(meta["name"], records, meta["convention"], dict(meta["meta"]))


def _sci(x: float) -> str:
    return "-" if not math.isfinite(x) else f"{x:.3e}"


def _rate(x: float) -> str:
    return "-" if not math.isfinite(x) else f"{x:.2f}"


def write_markdown(report: ConvergenceReport, path) -> None:
    errors = report.error_names
    if not errors:
        raise InvalidArgumentError("report has no error columns")
    rates = rate_columns(report)
    lines = [f"# {report.name}", "", f"Mesh size convention: `{report.convention}`.", ""]
    distance = [n for n in errors if re.fullmatch(r"l2_d[0-9.]+", n)]
    if distance:
        lines += ["| nodes | distance | error | rate |", "|---:|---:|---:|---:|"]
        for n in distance:
            d = n[len("l2_d"):]
            for k, r in enumerate(report.records):
                lines.append(f"| {r.nodes} | {d} | {_sci(r.errors.get(n, math.nan))} | {_rate(rates[n][k])} |")
        lines.append("")
        errors = [n for n in errors if n not in distance]
    if errors:
        head = ["level", "nodes", "h"] + [c for n in errors for c in (n, "rate")]
        lines += ["| " + " | ".join(head) + " |", "|" + "---:|" * len(head)]
        for k, r in enumerate(report.records):
            cells = [str(r.level), str(r.nodes), f"{r.h(report.convention):.4g}"]
            for n in errors:
                cells += [_sci(r.errors.get(n, math.nan)), _rate(rates[n][k])]
            lines.append("| " + " | ".join(cells) + " |")
        lines.append("")
    failed = [r for r in report.records if r.status != "ok"]
    if failed:
        lines += ["Failures:", ""] + [f"- level {r.level}: {r.status}" for r in failed] + [""]
    Path(path).write_text("\n".join(lines))


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.+-]", "_", name)


def write_plot_data(report: ConvergenceReport, directory) -> list[Path]:
    """One ``h error`` file per error column."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    hs = report.h()
    for name in report.error_names:
        p = directory / f"{_safe(name)}.dat"
        with open(p, "w") as fh:
            fh.write(f"# h ({report.convention}) {name}\n")
            for h, e in zip(hs, report.column(name)):
                fh.write(f"{_fmt(h)} {_fmt(e)}\n")
        paths.append(p)
    return paths


def emit_report(report: ConvergenceReport, out_dir) -> dict[str, Path]:
    """Write ``report.csv``, ``report.md`` and ``plots/*.dat`` into ``out_dir``."""
    if not report.records:
        raise InvalidArgumentError("empty report")
    if not report.error_names:
        raise InvalidArgumentError("report has no error columns")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(report, out / "report.csv")
    write_markdown(report, out / "report.md")
    write_plot_data(report, out / "plots")
    return {"csv": out / "report.csv", "markdown": out / "report.md", "plots": out / "plots"}
