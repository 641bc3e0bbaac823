import json
import os

import pytest

from bandit_router import cli
from bandit_router.report import read_csv

os.environ.setdefault("BANDIT_ROUTER_THREADS", "1")


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert run("synth", "--out", root, "--n", 480, "--n-prefs", 300) == 0
    cfg_path = root / "config.json"
    cfg = json.loads(cfg_path.read_text())
    cfg.update(pretrain={"epochs": 3}, alpha_grid=[0.5, 1.0], seeds=[0, 1], oful={"horizon": 100})
    cfg["budget_grid"] = [0.25, 0.5, 1.0, 1.5]
    cfg_path.write_text(json.dumps(cfg))
    return root


def _stderr_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


@pytest.mark.parametrize(
    "command, outputs",
    [
        ("pretrain", ["model.json"]),
        ("tune", ["best_hyperparams.json"]),
        ("replay-learn", ["regret.csv", "reward.csv", "seed_0/learn.json", "seed_1/learn.json"]),
        ("replay-deploy", ["deploy_summary.json", "seed_0/deploy.json", "seed_0/spend.csv"]),
        ("shift", ["shift.json", "shift_windows.csv"]),
        ("validate-regret", ["oful_regret.csv", "oful_summary.json"]),
    ],
)
def test_subcommands(workspace, tmp_path, command, outputs):
    out = tmp_path / command
    assert run(command, "--config", workspace / "config.json", "--out", out) == 0
    for name in outputs:
        assert (out / name).exists(), name
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["command"] == command and manifest["seeds"] == [0, 1]
    assert set(outputs) <= set(manifest["outputs"])


def test_spend_trace_columns(workspace, tmp_path):
    assert run("replay-deploy", "--config", workspace / "config.json", "--out", tmp_path, "--seed", 0) == 0
    rows = read_csv(tmp_path / "seed_0" / "spend.csv")
    assert list(rows[0]) == ["t", "bin", "chosen_arm", "cost", "B_left", "z", "fallback"]


def test_validate_regret_columns(workspace, tmp_path):
    assert run("validate-regret", "--config", workspace / "config.json", "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "oful_regret.csv")
    assert list(rows[0]) == ["t", "regret_oful_mean", "regret_oful_stderr", "regret_pioful_mean", "regret_pioful_stderr"]
    assert len(rows) == 100


def test_sweep_budget_is_byte_deterministic(workspace, tmp_path):
    for d in ("a", "b"):
        assert run("sweep-budget", "--config", workspace / "config.json", "--out", tmp_path / d) == 0
    for name in ("budget_table.csv", "tradeoff_table.csv", "sweep.json", "run_manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    table = read_csv(tmp_path / "a" / "tradeoff_table.csv")
    assert [float(r["cost"]) for r in table] == [0.25, 0.5, 1.0, 1.5]


def test_report_aggregates_seed_outputs(workspace, tmp_path):
    learn = tmp_path / "learn"
    assert run("replay-learn", "--config", workspace / "config.json", "--out", learn) == 0
    inputs = [learn / "seed_0" / "learn.json", learn / "seed_1" / "learn.json"]
    assert run("report", "--inputs", *inputs, "--kind", "regret", "--out", tmp_path / "rep") == 0
    assert read_csv(tmp_path / "rep" / "regret.csv")[0]["n_seeds"] == "2"


def test_missing_config(tmp_path, capsys):
    assert run("tune", "--config", tmp_path / "nope.json") == 2
    err = _stderr_json(capsys)
    assert err["exit_code"] == 2 and "config not found" in err["message"]


def test_malformed_config(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    assert run("tune", "--config", p) == 2
    assert "malformed config" in _stderr_json(capsys)["message"]


def test_missing_dataset_path(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"dataset": "absent.jsonl"}))
    assert run("replay-learn", "--config", p) == 2
    assert _stderr_json(capsys)["path"].endswith("absent.jsonl")


def test_bad_policy_kind(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"policy": {"kind": "oracle"}}))
    assert run("tune", "--config", p) == 2
    assert "unknown policy kind" in _stderr_json(capsys)["message"]


def test_unknown_flag(capsys):
    assert run("tune", "--bogus") == 2
    assert _stderr_json(capsys)["error"] == "CliError"


def test_schema_error_surfaces_line(tmp_path, capsys, workspace):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"query_id": "q", "embedding": [0], "scores": [0], "costs": [0]}\n')
    (tmp_path / "bad.manifest.json").write_text((workspace / "routing.manifest.json").read_text())
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"dataset": "bad.jsonl", "preferences": str(workspace / "preferences.jsonl")}))
    assert run("replay-learn", "--config", p, "--out", tmp_path / "o") == 2
    assert "at line 1" in _stderr_json(capsys)["message"]


def test_worker_pool_matches_inline(workspace, tmp_path, monkeypatch):
    for threads in ("1", "2"):
        monkeypatch.setenv("BANDIT_ROUTER_THREADS", threads)
        assert run("tune", "--config", workspace / "config.json", "--out", tmp_path / threads) == 0
    assert (tmp_path / "1" / "best_hyperparams.json").read_bytes() == (tmp_path / "2" / "best_hyperparams.json").read_bytes()


def test_bad_thread_cap(workspace, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("BANDIT_ROUTER_THREADS", "many")
    assert run("tune", "--config", workspace / "config.json", "--out", tmp_path) == 2
    assert "BANDIT_ROUTER_THREADS" in _stderr_json(capsys)["message"]


def test_budget_must_be_numeric(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"cost": {"budget": "auto"}}))
    assert run("replay-deploy", "--config", p) == 2
    assert "cost.budget" in _stderr_json(capsys)["message"]
