"""Command-line entry point: ``bandit-router <subcommand> --config run.json``.

Every subcommand writes its artifacts under ``--out`` (or the config's
``out``) together with ``run_manifest.json``. Failures print one JSON object
on stderr; bad input (missing files, malformed config, unknown flags) exits
with status 2, other errors with status 1.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .baselines import POLICY_KINDS, make_policy
from .cost_policy import CostPolicyConfig, CostPolicyError
from .data import Dataset, DatasetError, load_preferences, load_routing_dataset, split_buckets, write_dataset, write_preferences
from .oful import compare_regret
from .pretrain import PretrainError, PretrainHyperparams, Projection, ArmEmbeddings, load_model, save_model, train_arm_embeddings, train_projection
from .replay import (
    ReplayError,
    distribution_shift_replay,
    offline_tradeoff_performance,
    oracle_spend,
    policy_bounds,
    run_deployment,
    run_learning,
    tune_bin_size,
    tune_hyperparams,
)
from .report import ReportError, emit_budget_table, emit_spend_trace, emit_tradeoff_table, mean_stderr, write_csv, write_json
from .synthetic import SyntheticWorld, shift_streams

DEFAULT_ALPHA_GRID = [1.0, 1.5, 2.0, 5.0, 10.0]
DEFAULT_WINDOW_GRID = [10, 50, 100, 500]
DEFAULT_BUDGET_GRID = [0.25, 0.5, 1.0, 1.5]
PATH_KEYS = ("dataset", "preferences", "model", "manifest", "stream_a", "stream_b")


class CliError(Exception):
    def __init__(self, message: str, code: int = 2, path: str | None = None):
        super().__init__(message)
        self.code = code
        self.path = path


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


# ---------------------------------------------------------------------------
# configuration


def load_config(path: str | None) -> tuple[dict, str]:
    """Parse a JSON run config; returns ``(config, sha256 of its bytes)``.

    Relative paths resolve against the config file's directory and must exist.
    """
    if path is None:
        return {}, hashlib.sha256(b"{}").hexdigest()
    p = Path(path)
    if not p.exists():
        raise CliError(f"config not found: {p}", path=str(p))
    raw = p.read_bytes()
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed config {p}: {exc}", path=str(p)) from None
    if not isinstance(cfg, dict):
        raise CliError(f"malformed config {p}: top level must be an object", path=str(p))
    base = p.parent
    for section in (cfg, cfg.get("shift", {})):
        for key in PATH_KEYS:
            if key in section and section[key] is not None:
                section[key] = str((base / section[key]).resolve())
    check_config(cfg)
    return cfg, hashlib.sha256(raw).hexdigest()


def check_config(cfg: dict) -> None:
    for section in (cfg, cfg.get("shift", {})):
        for key in PATH_KEYS:
            # an output model path need not exist yet
            if key == "model" and section is cfg and "preferences" in cfg:
                continue
            if section.get(key) is not None and not Path(section[key]).exists():
                raise CliError(f"{key} path not found: {section[key]}", path=section[key])
    for key in ("alpha_grid", "window_grid", "budget_grid", "seeds"):
        if key in cfg and (not isinstance(cfg[key], list) or not cfg[key]):
            raise CliError(f"config field {key!r} must be a non-empty list")
    split = cfg.get("split", {})
    if int(split.get("tuning_n", 0)) < 0:
        raise CliError("split.tuning_n must be non-negative")
    kind = cfg.get("policy", {}).get("kind", "pilot")
    if kind not in POLICY_KINDS:
        raise CliError(f"unknown policy kind {kind!r}")
    cost = cfg.get("cost", {})
    if "budget" in cost and not _positive(cost["budget"]):
        raise CliError("cost.budget must be positive")
    if "bin_size" in cost and not (cost["bin_size"] == "auto" or _positive(cost["bin_size"])):
        raise CliError("cost.bin_size must be positive or \"auto\"")


def _positive(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0


def _require(cfg: dict, key: str):
    if cfg.get(key) is None:
        raise CliError(f"config is missing {key!r}")
    return cfg[key]


# ---------------------------------------------------------------------------
# shared pipeline pieces


@dataclass
class Context:
    dataset: Dataset
    tuning: Dataset
    learning: Dataset
    deployment: Dataset
    projection: Projection
    embeddings: ArmEmbeddings


def _hyperparams(cfg: dict, seed: int) -> PretrainHyperparams:
    pt = cfg.get("pretrain", {})
    return PretrainHyperparams(
        learning_rate=float(pt.get("learning_rate", 0.05)),
        epochs=int(pt.get("epochs", 30)),
        margin=float(pt.get("margin", 0.2)),
        seed=seed,
    )


def _pretrain(cfg: dict, dataset: Dataset, seed: int) -> tuple[Projection, ArmEmbeddings]:
    prefs = load_preferences(_require(cfg, "preferences"), dataset.arms, dataset.d_e)
    hp = _hyperparams(cfg, seed)
    proj = train_projection(prefs, int(cfg.get("pretrain", {}).get("d_m", 8)), hp)
    return proj, train_arm_embeddings(prefs, proj, hp, n_arms=dataset.n_arms)


def _load_dataset(cfg: dict, key: str = "dataset", section: dict | None = None) -> Dataset:
    section = cfg if section is None else section
    return load_routing_dataset(_require(section, key), cfg.get("format"), cfg.get("manifest"))


def _context(cfg: dict, seed: int) -> Context:
    data = _load_dataset(cfg)
    if cfg.get("model") and Path(cfg["model"]).exists():
        proj, emb, _ = load_model(cfg["model"])
    else:
        proj, emb = _pretrain(cfg, data, seed)
    split = cfg.get("split", {})
    tuning, learning, deployment = split_buckets(
        data,
        int(split.get("tuning_n", 1000)),
        int(split.get("learn_ratio", 10)),
        int(split.get("deploy_ratio", 1)),
        seed=seed,
        shuffle=bool(split.get("shuffle", True)),
    )
    return Context(data, tuning, learning, deployment, proj, emb)


def _policy(cfg: dict, ctx: Context, seed: int, **overrides):
    spec = {"seed": seed, **cfg.get("policy", {}), **overrides}
    return make_policy(spec, ctx.dataset.n_arms, ctx.projection.d_m, ctx.embeddings, ctx.projection)


def _tune(cfg: dict, ctx: Context, seed: int) -> dict:
    kind = cfg.get("policy", {}).get("kind", "pilot")
    if kind in ("pilot", "linucb"):
        name, grid = "alpha", cfg.get("alpha_grid", DEFAULT_ALPHA_GRID)
    elif kind == "epoch_greedy":
        name, grid = "window", cfg.get("window_grid", DEFAULT_WINDOW_GRID)
    else:
        return {}
    if len(ctx.tuning) == 0:
        raise CliError("tuning requires split.tuning_n > 0")
    best, rewards = tune_hyperparams(
        lambda v: _policy(cfg, ctx, seed, **{name: v}),
        ctx.tuning,
        ctx.projection,
        grid,
        cfg.get("binarize_threshold"),
    )
    return {name: best, "tuning_rewards": {str(k): v for k, v in rewards.items()}}


def _trained_policy(cfg: dict, ctx: Context, seed: int):
    """Policy with configured or tuned hyperparameters, learned on the learning bucket."""
    overrides = {}
    kind = cfg.get("policy", {}).get("kind", "pilot")
    key = "window" if kind == "epoch_greedy" else "alpha"
    if kind in ("pilot", "linucb", "epoch_greedy") and key not in cfg.get("policy", {}):
        tuned = _tune(cfg, ctx, seed)
        overrides[key] = tuned[key]
    policy = _policy(cfg, ctx, seed, **overrides)
    report = run_learning(policy, ctx.learning, ctx.projection, cfg.get("binarize_threshold"))
    return policy, report, overrides


def _bounds(cfg: dict, policy, ctx: Context) -> tuple[float, float]:
    cost = cfg.get("cost", {})
    ub, lb = cost.get("ub", "auto"), cost.get("lb", "auto")
    if ub == "auto" or lb == "auto":
        if len(ctx.tuning) == 0:
            raise CliError("automatic UB/LB needs a tuning bucket")
        est_ub, est_lb = policy_bounds(policy, ctx.tuning, ctx.projection)
        ub = est_ub if ub == "auto" else ub
        lb = est_lb if lb == "auto" else lb
    return float(ub), float(lb)


def _bin_size(cfg: dict, policy, ctx: Context, budget: float, ub: float, lb: float) -> int:
    s = cfg.get("cost", {}).get("bin_size", 100)
    if s == "auto":
        s, _ = tune_bin_size(policy, ctx.tuning, ctx.projection, budget / len(ctx.deployment), ub, lb)
    return int(s)


def _budget_scale(cfg: dict, ctx: Context) -> float:
    """Budgets are absolute, or fractions of best-arm routing spend."""
    return oracle_spend(ctx.deployment) if cfg.get("budget_mode") == "oracle_fraction" else 1.0


def _report_dict(report) -> dict:
    out = report.summary()
    out["regret_curve"] = report.regret_curve
    out["reward_by_step"] = report.reward_by_step
    return out


# ---------------------------------------------------------------------------
# per-seed work (runs in worker processes; returns plain data)


def _seed_tune(cfg, seed):
    ctx = _context(cfg, seed)
    return _tune(cfg, ctx, seed)


def _seed_learn(cfg, seed):
    ctx = _context(cfg, seed)
    _, report, hyper = _trained_policy(cfg, ctx, seed)
    return {"hyperparams": hyper, **_report_dict(report)}


def _seed_deploy(cfg, seed):
    ctx = _context(cfg, seed)
    policy, _, hyper = _trained_policy(cfg, ctx, seed)
    budget = cfg.get("cost", {}).get("budget")
    if budget is None:
        report = run_deployment(policy, ctx.deployment, ctx.projection)
        return {"hyperparams": hyper, "report": _report_dict(report), "trace": []}
    budget = float(budget) * _budget_scale(cfg, ctx)
    ub, lb = _bounds(cfg, policy, ctx)
    s = _bin_size(cfg, policy, ctx, budget, ub, lb)
    cost_cfg = CostPolicyConfig(budget, len(ctx.deployment), ub, lb, bin_size=s)
    report = run_deployment(policy, ctx.deployment, ctx.projection, cost_cfg)
    return {"hyperparams": hyper, "report": _report_dict(report), "trace": report.spend_trace,
            "ub": ub, "lb": lb, "bin_size": s}


def _seed_sweep(cfg, seed):
    ctx = _context(cfg, seed)
    policy, _, hyper = _trained_policy(cfg, ctx, seed)
    ub, lb = _bounds(cfg, policy, ctx)
    scale = _budget_scale(cfg, ctx)
    baselines = {"pilot" if cfg.get("policy", {}).get("kind", "pilot") == "pilot" else "policy": policy}
    for spec in cfg.get("baselines", []):
        b = make_policy({"seed": seed, **spec}, ctx.dataset.n_arms, ctx.projection.d_m, ctx.embeddings, ctx.projection)
        run_learning(b, ctx.learning, ctx.projection, cfg.get("binarize_threshold"))
        baselines[spec.get("name", spec["kind"])] = b
    rows, tradeoff = [], []
    main_name = next(iter(baselines))
    for g in cfg.get("budget_grid", DEFAULT_BUDGET_GRID):
        budget = float(g) * scale
        s = _bin_size(cfg, policy, ctx, budget, ub, lb)
        cost_cfg = CostPolicyConfig(budget, len(ctx.deployment), ub, lb, bin_size=s)
        for name, pol in baselines.items():
            rep = run_deployment(pol, ctx.deployment, ctx.projection, cost_cfg)
            rows.append({"seed": seed, "policy": name, "budget": float(g), "performance": rep.deployment_performance,
                         "budget_used": rep.budget_used, "terminated": rep.terminated, "bin_size": s})
            if name == main_name:
                offline, lam = offline_tradeoff_performance(pol, ctx.deployment, ctx.projection, budget)
                tradeoff.append({"cost": float(g), "offline_tradeoff": offline, "pilot": rep.deployment_performance,
                                 "lambda": lam})
    return {"hyperparams": hyper, "ub": ub, "lb": lb, "rows": rows, "tradeoff": tradeoff}


def _seed_shift(cfg, seed):
    sh = _require(cfg, "shift")
    a = _load_dataset(cfg, "stream_a", sh)
    b = _load_dataset(cfg, "stream_b", sh)
    if cfg.get("model"):
        proj, emb, _ = load_model(cfg["model"])
    else:
        proj, emb = _pretrain(cfg, a, seed)
    ctx = Context(a, a, a, b, proj, emb)
    policy = _policy(cfg, ctx, seed)
    rep = distribution_shift_replay(policy, a, b, proj, int(sh.get("probe_window", 500)), sh.get("after_delay"))
    return rep.to_dict()


def _workers(n_tasks: int) -> int:
    cap = os.environ.get("BANDIT_ROUTER_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise CliError(f"BANDIT_ROUTER_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(limit, n_tasks))


def run_seeds(fn, cfg: dict, seeds: list[int]) -> list:
    """Run ``fn(cfg, seed)`` for every seed; results come back in seed order."""
    workers = _workers(len(seeds))
    if workers == 1:
        return [fn(cfg, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, [cfg] * len(seeds), seeds))


# ---------------------------------------------------------------------------
# subcommands (main process; all file writes happen here)


def cmd_pretrain(cfg, seeds, out: Path) -> list[Path]:
    data = _load_dataset(cfg)
    proj, emb = _pretrain(cfg, data, seeds[0])
    path = out / "model.json"
    out.mkdir(parents=True, exist_ok=True)
    save_model(path, proj, emb, data.arms)
    return [path]


def cmd_tune(cfg, seeds, out: Path) -> list[Path]:
    results = run_seeds(_seed_tune, cfg, seeds)
    per_seed = {str(s): r for s, r in zip(seeds, results)}
    best = {}
    for key in ("alpha", "window"):
        votes = [r[key] for r in results if key in r]
        if votes:
            counts = Counter(votes)
            top = max(counts.values())
            best[key] = min(v for v, c in counts.items() if c == top)
    return [write_json(out / "best_hyperparams.json", {"best": best, "per_seed": per_seed})]


def _series_csv(path: Path, curves: list, name: str, desc: str) -> Path:
    curves = [np.asarray(c, dtype=float) for c in curves]
    t = np.arange(1, len(curves[0]) + 1)
    if len(curves) == 1:
        return write_csv(path, ["t", name], ["step (1-based)", desc], zip(t, curves[0]))
    mean, se = mean_stderr(curves)
    return write_csv(path, ["t", "mean", "stderr", "n_seeds"],
                     ["step (1-based)", f"seed mean of {desc}", "standard error of the mean", "number of seeds"],
                     ((a, b, c, len(curves)) for a, b, c in zip(t, mean, se)))


def cmd_replay_learn(cfg, seeds, out: Path) -> list[Path]:
    results = run_seeds(_seed_learn, cfg, seeds)
    paths = [write_json(out / f"seed_{s}" / "learn.json", r) for s, r in zip(seeds, results)]
    lengths = {len(r["regret_curve"]) for r in results}
    if len(lengths) == 1:
        paths.append(_series_csv(out / "regret.csv", [r["regret_curve"] for r in results],
                                 "regret", "cumulative regret after step t"))
        paths.append(_series_csv(out / "reward.csv", [r["reward_by_step"] for r in results],
                                 "reward", "score of the arm served at step t"))
    return paths


def cmd_replay_deploy(cfg, seeds, out: Path) -> list[Path]:
    results = run_seeds(_seed_deploy, cfg, seeds)
    paths = []
    for s, r in zip(seeds, results):
        d = out / f"seed_{s}"
        paths.append(write_json(d / "deploy.json", {k: v for k, v in r.items() if k != "trace"}))
        if r["trace"]:
            paths.append(emit_spend_trace(r["trace"], d / "spend.csv"))
    perf = [r["report"]["deployment_performance"] for r in results]
    m, se = mean_stderr(perf)
    paths.append(write_json(out / "deploy_summary.json", {"performance_mean": float(m), "performance_stderr": float(se),
                                                          "n_seeds": len(seeds),
                                                          "n_terminated": sum(r["report"]["terminated"] for r in results)}))
    return paths


def cmd_sweep_budget(cfg, seeds, out: Path) -> list[Path]:
    results = run_seeds(_seed_sweep, cfg, seeds)
    rows = [row for r in results for row in r["rows"]]
    paths = [write_json(out / "sweep.json", {str(s): r for s, r in zip(seeds, results)}),
             emit_budget_table(rows, out / "budget_table.csv")]
    by_cost = {}
    for r in results:
        for t in r["tradeoff"]:
            by_cost.setdefault(t["cost"], []).append(t)
    table = [{"cost": c, "offline_tradeoff": float(np.nanmean([t["offline_tradeoff"] for t in ts])),
              "pilot": float(np.mean([t["pilot"] for t in ts]))} for c, ts in by_cost.items()]
    paths.append(emit_tradeoff_table(table, out / "tradeoff_table.csv"))
    return paths


def cmd_shift(cfg, seeds, out: Path) -> list[Path]:
    results = run_seeds(_seed_shift, cfg, seeds)
    paths = [write_json(out / "shift.json", {str(s): r for s, r in zip(seeds, results)})]
    rows = []
    metrics = ("mean_reward", "mean_width", "std_width", "mean_covariance_trace")
    for window in ("before", "during", "after"):
        row = [window]
        for m in metrics:
            mean, se = mean_stderr([r["windows"][window][m] for r in results])
            row += [float(mean), float(se)]
        rows.append(row)
    cols = ["window"] + [f"{m}{suf}" for m in metrics for suf in ("", "_stderr")]
    descs = ["probe window"] + [f"{m} seed {'mean' if not suf else 'standard error'}"
                                for m in metrics for suf in ("", "_stderr")]
    paths.append(write_csv(out / "shift_windows.csv", cols, descs, rows))
    return paths


def cmd_validate_regret(cfg, seeds, out: Path) -> list[Path]:
    res = compare_regret(seeds, **cfg.get("oful", {}))
    paths = [write_csv(
        out / "oful_regret.csv",
        ["t", "regret_oful_mean", "regret_oful_stderr", "regret_pioful_mean", "regret_pioful_stderr"],
        ["round", "OFUL mean cumulative regret", "standard error", "prior-initialised OFUL mean", "standard error"],
        zip(res["t"], res["oful_mean"], res["oful_stderr"], res["pi_oful_mean"], res["pi_oful_stderr"]),
    )]
    summary = {k: res[k] for k in ("bound_oful", "bound_pi_oful", "final_diff_stderr", "n_seeds")}
    summary["oful_final"] = float(res["oful_mean"][-1])
    summary["pi_oful_final"] = float(res["pi_oful_mean"][-1])
    paths.append(write_json(out / "oful_summary.json", summary))
    return paths


def cmd_report(cfg, seeds, out: Path, inputs: list[str], kind: str) -> list[Path]:
    if not inputs:
        raise CliError("report needs at least one --inputs file")
    loaded = []
    for p in inputs:
        if not Path(p).exists():
            raise CliError(f"input not found: {p}", path=p)
        try:
            loaded.append(json.loads(Path(p).read_text()))
        except json.JSONDecodeError as exc:
            raise CliError(f"malformed input {p}: {exc}", path=p) from None
    if kind == "budget":
        rows = []
        for obj in loaded:
            for r in obj.values() if "rows" not in obj else [obj]:
                rows += r["rows"]
        return [emit_budget_table(rows, out / "budget_table.csv")]
    key = {"regret": "regret_curve", "reward": "reward_by_step"}[kind]
    curves = [obj[key] for obj in loaded]
    if len({len(c) for c in curves}) != 1:
        raise CliError("inputs have different lengths")
    return [_series_csv(out / f"{kind}.csv", curves, kind, key.replace("_", " "))]


def cmd_synth(cfg, seeds, out: Path, n: int, n_prefs: int) -> list[Path]:
    world = SyntheticWorld(seed=seeds[0], **cfg.get("world", {}))
    out.mkdir(parents=True, exist_ok=True)
    data = world.routing_dataset(n, seed=seeds[0])
    write_dataset(data, out / "routing.jsonl")
    write_preferences(world.preferences(n_prefs, seed=seeds[0]), out / "preferences.jsonl")
    a, b = shift_streams(world, n // 2, n // 2, seed=seeds[0])
    write_dataset(a, out / "stream_a.jsonl")
    write_dataset(b, out / "stream_b.jsonl")
    config = {
        "dataset": "routing.jsonl",
        "preferences": "preferences.jsonl",
        "split": {"tuning_n": min(1000, n // 12)},
        "policy": {"kind": "pilot"},
        "cost": {"budget": 0.5, "bin_size": "auto", "ub": "auto", "lb": "auto"},
        "budget_mode": "oracle_fraction",
        "budget_grid": [0.3, 0.5, 0.75, 1.0],
        "baselines": [{"kind": "random", "name": "random"},
                      {"kind": "fixed", "arm": world.cheapest_arm(), "name": "fixed_cheapest"}],
        "shift": {"stream_a": "stream_a.jsonl", "stream_b": "stream_b.jsonl", "probe_window": max(1, n // 20)},
        "seeds": [seeds[0]],
    }
    return [out / "routing.jsonl", out / "preferences.jsonl", write_json(out / "config.json", config)]


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bandit-router", description="Preference-prior contextual bandit LLM routing.")
    parser.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--seed", type=int, help="run a single seed (overrides the config's seeds)")
    common.add_argument("--out", help="output directory (overrides the config's out)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [
        ("pretrain", "train the query projection and arm embeddings from preferences"),
        ("tune", "grid-search alpha (or window) on the tuning bucket"),
        ("replay-learn", "online learning replay with bandit feedback"),
        ("replay-deploy", "frozen greedy deployment under the cost policy"),
        ("sweep-budget", "performance-vs-budget table"),
        ("shift", "distribution-shift replay with before/during/after probes"),
        ("validate-regret", "OFUL vs prior-initialised OFUL on synthetic linear bandits"),
    ]:
        sub.add_parser(name, parents=[common], help=help_)
    rep = sub.add_parser("report", parents=[common], help="aggregate saved JSON outputs across seeds")
    rep.add_argument("--inputs", nargs="+", default=[])
    rep.add_argument("--kind", choices=["regret", "reward", "budget"], default="regret")
    syn = sub.add_parser("synth", parents=[common], help="write a synthetic dataset, preferences and config")
    syn.add_argument("--n", type=int, default=12_000)
    syn.add_argument("--n-prefs", type=int, default=2_000)
    return parser


COMMANDS = {
    "pretrain": cmd_pretrain,
    "tune": cmd_tune,
    "replay-learn": cmd_replay_learn,
    "replay-deploy": cmd_replay_deploy,
    "sweep-budget": cmd_sweep_budget,
    "shift": cmd_shift,
    "validate-regret": cmd_validate_regret,
}


def _emit_error(exc: Exception, code: int, path: str | None = None) -> int:
    payload: dict[str, Any] = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if path:
        payload["path"] = path
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg, digest = load_config(args.config)
        seeds = [args.seed] if args.seed is not None else [int(s) for s in cfg.get("seeds", [0])]
        out = Path(args.out or cfg.get("out") or "bandit_router_out")
        if args.command == "report":
            paths = cmd_report(cfg, seeds, out, args.inputs, args.kind)
        elif args.command == "synth":
            paths = cmd_synth(cfg, seeds, out, args.n, args.n_prefs)
        else:
            paths = COMMANDS[args.command](cfg, seeds, out)
        manifest = {
            "command": args.command,
            "config": cfg,
            "config_sha256": digest,
            "seeds": seeds,
            "version": __version__,
            "outputs": sorted(str(p.relative_to(out)) for p in paths if out in p.parents),
        }
        write_json(out / "run_manifest.json", manifest)
        print(json.dumps({"command": args.command, "out": str(out)}, sort_keys=True))
        return 0
    except CliError as exc:
        return _emit_error(exc, exc.code, exc.path)
    except (DatasetError, CostPolicyError, PretrainError, ReplayError, ReportError) as exc:
        return _emit_error(exc, 2)
    except Exception as exc:  # noqa: BLE001 - surface anything else as JSON too
        return _emit_error(exc, 1)


if __name__ == "__main__":
    sys.exit(main())
