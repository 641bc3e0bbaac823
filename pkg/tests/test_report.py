import json
import math

import numpy as np
import pytest

from bandit_router.cost_policy import TraceStep
from bandit_router.replay import ReplayReport
from bandit_router.report import (
    ReportError,
    emit_budget_table,
    emit_report,
    emit_series,
    emit_spend_trace,
    emit_tradeoff_table,
    read_csv,
    write_json,
)


def _report(curve, policy="PilotRouter"):
    curve = np.asarray(curve, dtype=float)
    return ReplayReport(policy, len(curve), 1.0, float(curve[-1]), curve, curve, np.array([len(curve)]))


def test_comment_row_documents_columns(tmp_path):
    p = emit_series([_report([0.1, 0.3])], "regret", tmp_path / "r.csv")
    first = p.read_text().splitlines()[0]
    assert first.startswith("# t: ") and "regret: " in first
    assert read_csv(p) == [{"t": "1", "regret": "0.1"}, {"t": "2", "regret": "0.3"}]


def test_seed_aggregation(tmp_path):
    p = emit_series([_report([1.0, 2.0]), _report([3.0, 6.0])], "regret", tmp_path / "r.csv")
    rows = read_csv(p)
    assert float(rows[1]["mean"]) == 4.0
    # DERIVED: std(ddof=1) of (2, 6) is 2*sqrt(2); divided by sqrt(2) gives 2
    assert float(rows[1]["stderr"]) == pytest.approx(2.0)
    assert rows[0]["n_seeds"] == "2"


def test_heterogeneous_reports_rejected(tmp_path):
    with pytest.raises(ReportError, match="homogeneous"):
        emit_series([_report([1.0]), _report([1.0, 2.0])], "regret", tmp_path / "r.csv")
    with pytest.raises(ReportError, match="homogeneous"):
        emit_series([_report([1.0]), _report([1.0], policy="X")], "regret", tmp_path / "r.csv")


def test_unknown_kind_and_empty(tmp_path):
    with pytest.raises(ReportError, match="unknown series kind"):
        emit_series([_report([1.0])], "latency", tmp_path / "r.csv")
    with pytest.raises(ReportError):
        emit_report([], "regret", tmp_path)
    with pytest.raises(ReportError, match="no width series"):
        emit_series([_report([1.0])], "width", tmp_path / "w.csv")


def test_spend_trace_columns(tmp_path):
    trace = [TraceStep(0, 0, 2, 0.5, 1.5, 0.25, False), TraceStep(1, 0, 1, 0.1, 1.4, 0.3, True)]
    rows = read_csv(emit_spend_trace(trace, tmp_path / "s.csv"))
    assert list(rows[0]) == ["t", "bin", "chosen_arm", "cost", "B_left", "z", "fallback"]
    assert rows[1]["fallback"] == "true" and rows[0]["B_left"] == "1.5"


def test_budget_table_groups_seeds(tmp_path):
    rows = [
        {"policy": "pilot", "budget": 1.0, "performance": 0.5, "budget_used": 0.9, "terminated": False, "seed": 0},
        {"policy": "pilot", "budget": 1.0, "performance": 0.7, "budget_used": 0.8, "terminated": True, "seed": 1},
        {"policy": "random", "budget": 1.0, "performance": 0.4, "budget_used": 1.0, "terminated": False, "seed": 0},
    ]
    out = read_csv(emit_budget_table(rows, tmp_path / "b.csv"))
    assert [r["policy"] for r in out] == ["pilot", "random"]
    assert float(out[0]["performance"]) == pytest.approx(0.6)
    assert out[0]["n_terminated"] == "1" and out[0]["n_seeds"] == "2"


def test_tradeoff_table(tmp_path):
    out = read_csv(emit_tradeoff_table([{"cost": 0.25, "offline_tradeoff": 0.5, "pilot": 0.6}], tmp_path / "t.csv"))
    assert list(out[0]) == ["cost", "offline_tradeoff", "pilot", "difference"]
    assert float(out[0]["difference"]) == pytest.approx(0.1)


def test_json_is_deterministic_and_nan_safe(tmp_path):
    obj = {"b": np.float64(math.nan), "a": np.arange(3), "c": np.bool_(True)}
    p1, p2 = write_json(tmp_path / "1.json", obj), write_json(tmp_path / "2.json", dict(reversed(obj.items())))
    assert p1.read_bytes() == p2.read_bytes()
    assert json.loads(p1.read_text()) == {"a": [0, 1, 2], "b": None, "c": True}


def test_emit_report_writes_json_and_csv(tmp_path):
    paths = emit_report([_report([0.0, 1.0])], "reward", tmp_path, stem="x")
    assert [p.name for p in paths] == ["x.json", "x_reward.csv"]
    rep = _report([0.0])
    rep.spend_trace = [TraceStep(0, 0, 0, 0.1, 0.9, 0.1, False)]
    assert emit_report([rep], "spend", tmp_path)[1].name == "report_spend.csv"
