"""Deterministic CSV/JSON emission for replay results.

Every CSV starts with a ``#`` comment row documenting its columns, followed
by a normal header row. Floats are written with ``repr`` so identical inputs
give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cost_policy import TraceStep
from .replay import ReplayReport

SERIES_KINDS = {
    "regret": ("regret_curve", "cumulative regret after step t"),
    "reward": ("reward_by_step", "score of the arm served at step t"),
    "width": ("widths", "UCB width term of the chosen arm at step t"),
    "covariance_trace": ("covariance_traces", "trace of the chosen arm's inverse Gram matrix at step t"),
}


class ReportError(ValueError):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path, columns: Sequence[str], descriptions: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("# " + "; ".join(f"{c}: {d}" for c, d in zip(columns, descriptions)) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return None if math.isnan(f) else f
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def mean_stderr(values, axis=0):
    v = np.asarray(values, dtype=float)
    if v.shape[axis] == 0:
        raise ReportError("nothing to aggregate")
    mean = v.mean(axis=axis)
    n = v.shape[axis]
    se = v.std(axis=axis, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def emit_series(reports: Sequence[ReplayReport], kind: str, path) -> Path:
    """Per-step series CSV; several reports (seeds) are averaged."""
    if not reports:
        raise ReportError("no reports to emit")
    if kind not in SERIES_KINDS:
        raise ReportError(f"unknown series kind {kind!r}; expected one of {sorted(SERIES_KINDS)}")
    attr, desc = SERIES_KINDS[kind]
    curves = [getattr(r, attr) for r in reports]
    if any(c is None for c in curves):
        raise ReportError(f"reports carry no {kind} series")
    if len({len(c) for c in curves}) != 1 or len({r.policy for r in reports}) != 1:
        raise ReportError("reports are not homogeneous (policy or length differ)")
    t = np.arange(1, len(curves[0]) + 1)
    if len(reports) == 1:
        return write_csv(path, ["t", kind], ["step (1-based)", desc], zip(t, curves[0]))
    mean, se = mean_stderr(curves)
    return write_csv(
        path,
        ["t", "mean", "stderr", "n_seeds"],
        ["step (1-based)", f"seed mean of {desc}", "standard error of the mean", "number of seeds"],
        ((ti, m, s, len(reports)) for ti, m, s in zip(t, mean, se)),
    )


def emit_spend_trace(trace: Sequence[TraceStep], path) -> Path:
    if not trace:
        raise ReportError("no spend trace to emit")
    return write_csv(
        path,
        ["t", "bin", "chosen_arm", "cost", "B_left", "z", "fallback"],
        ["query (0-based)", "bin index", "served arm", "charged cost", "budget left after charge",
         "raw bin utilization z", "served through the per-query fallback"],
        ((s.t, s.bin, s.chosen_arm, s.cost, s.B_left, s.z, s.fallback) for s in trace),
    )


def emit_budget_table(rows: Sequence[dict], path) -> Path:
    """Performance-vs-budget table, aggregated over any ``seed`` key."""
    if not rows:
        raise ReportError("no rows to emit")
    groups = defaultdict(list)
    for r in rows:
        groups[(r["policy"], float(r["budget"]))].append(r)
    out = []
    for (policy, budget), rs in sorted(groups.items()):
        perf, perf_se = mean_stderr([r["performance"] for r in rs])
        used, _ = mean_stderr([r["budget_used"] for r in rs])
        out.append((policy, budget, float(perf), float(perf_se), float(used),
                    sum(bool(r["terminated"]) for r in rs), len(rs)))
    return write_csv(
        path,
        ["policy", "budget", "performance", "performance_stderr", "budget_used", "n_terminated", "n_seeds"],
        ["policy name", "total budget B", "mean deployment performance", "standard error over seeds",
         "mean spend", "runs stopped for insufficient budget", "number of seeds"],
        out,
    )


def emit_tradeoff_table(rows: Sequence[dict], path) -> Path:
    """Cost / offline P-lambda*C / PILOT / difference table."""
    if not rows:
        raise ReportError("no rows to emit")
    return write_csv(
        path,
        ["cost", "offline_tradeoff", "pilot", "difference"],
        ["budget", "hindsight-tuned P - lambda*C router performance", "online cost policy performance",
         "pilot minus offline"],
        ((r["cost"], r["offline_tradeoff"], r["pilot"], r["pilot"] - r["offline_tradeoff"]) for r in rows),
    )


def emit_report(reports: Sequence[ReplayReport], kind: str, out_dir, stem: str = "report") -> list[Path]:
    """Write a JSON summary plus the CSV series for ``kind``.

    ``kind`` is a series name (``regret``, ``reward``, ``width``,
    ``covariance_trace``) or ``spend`` for the spend trace of a single
    deployment report.
    """
    if not reports:
        raise ReportError("no reports to emit")
    out_dir = Path(out_dir)
    paths = [write_json(out_dir / f"{stem}.json", [r.summary() for r in reports])]
    if kind == "spend":
        if len(reports) != 1:
            raise ReportError("spend traces are emitted one report at a time")
        paths.append(emit_spend_trace(reports[0].spend_trace, out_dir / f"{stem}_spend.csv"))
    else:
        paths.append(emit_series(reports, kind, out_dir / f"{stem}_{kind}.csv"))
    return paths
