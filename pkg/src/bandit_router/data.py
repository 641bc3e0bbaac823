"""Domain types and on-disk dataset formats.

A routing dataset is a JSONL (or CSV) file of per-query records plus a sidecar
manifest describing the arm pool::

    data.jsonl            {"query_id", "embedding", "scores", "costs", "task_tag"?}
    data.manifest.json    {"d_e": int, "arms": [{"name": str, "size_rank": int}, ...]}

Preference files are JSONL with ``{"query_id", "embedding", "arm_i", "arm_j",
"winner"}`` where the arm fields hold arm names from the manifest.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class DatasetError(ValueError):
    """Raised when a dataset or manifest violates its schema."""


@dataclass(frozen=True)
class ArmId:
    index: int
    name: str
    size_rank: int
    # optional token pricing used by cost estimation
    input_price: float | None = None
    output_price: float | None = None
    mean_output_tokens: float | None = None

    def to_manifest(self) -> dict:
        out = {"name": self.name, "size_rank": self.size_rank}
        for key in ("input_price", "output_price", "mean_output_tokens"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


@dataclass(frozen=True, eq=False)
class RoutingRecord:
    query_id: str
    embedding: np.ndarray
    scores: np.ndarray
    costs: np.ndarray
    task_tag: str | None = None

    def to_json(self) -> dict:
        out = {
            "query_id": self.query_id,
            "embedding": [float(v) for v in self.embedding],
            "scores": [float(v) for v in self.scores],
            "costs": [float(v) for v in self.costs],
        }
        if self.task_tag is not None:
            out["task_tag"] = self.task_tag
        return out


@dataclass(frozen=True, eq=False)
class PreferenceRecord:
    query_id: str
    embedding: np.ndarray
    arm_i: ArmId
    arm_j: ArmId
    winner: ArmId

    def __post_init__(self):
        if self.arm_i.index == self.arm_j.index:
            raise DatasetError(f"preference {self.query_id!r}: arm_i == arm_j")
        if self.winner.index not in (self.arm_i.index, self.arm_j.index):
            raise DatasetError(
                f"preference {self.query_id!r}: winner {self.winner.name!r} "
                "is not one of the compared arms"
            )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable, validated collection of routing records over one arm pool."""

    records: tuple[RoutingRecord, ...]
    arms: tuple[ArmId, ...]
    d_e: int
    split_seed: int = 0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @cached_property
    def embeddings(self) -> np.ndarray:
        if not self.records:
            return np.empty((0, self.d_e))
        return np.vstack([r.embedding for r in self.records])

    @cached_property
    def scores(self) -> np.ndarray:
        if not self.records:
            return np.empty((0, self.n_arms))
        return np.vstack([r.scores for r in self.records])

    @cached_property
    def costs(self) -> np.ndarray:
        if not self.records:
            return np.empty((0, self.n_arms))
        return np.vstack([r.costs for r in self.records])

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(
            records=tuple(self.records[i] for i in indices),
            arms=self.arms,
            d_e=self.d_e,
            split_seed=self.split_seed,
        )

    def head(self, n: int) -> "Dataset":
        return self.subset(range(min(n, len(self))))

    def arm_by_name(self, name: str) -> ArmId:
        for arm in self.arms:
            if arm.name == name:
                return arm
        raise KeyError(name)


def make_arms(names: Sequence[str], size_ranks: Sequence[int] | None = None) -> tuple[ArmId, ...]:
    if size_ranks is None:
        size_ranks = range(len(names))
    arms = tuple(ArmId(i, n, int(r)) for i, (n, r) in enumerate(zip(names, size_ranks)))
    _check_arms(arms)
    return arms


def _check_arms(arms: Sequence[ArmId]) -> None:
    if not arms:
        raise DatasetError("manifest declares no arms")
    names = [a.name for a in arms]
    if len(set(names)) != len(names):
        raise DatasetError("duplicate arm names in manifest")
    ranks = [a.size_rank for a in arms]
    if len(set(ranks)) != len(ranks):
        raise DatasetError("size_rank values must be distinct (total order)")
    if [a.index for a in arms] != list(range(len(arms))):
        raise DatasetError("arm indices must be dense 0..k-1")


def manifest_path_for(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


def load_manifest(path: str | Path) -> tuple[int, tuple[ArmId, ...]]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"manifest not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"manifest {path} is not valid JSON: {exc}") from exc
    try:
        d_e = int(raw["d_e"])
        arms = tuple(
            ArmId(
                index=i,
                name=str(a["name"]),
                size_rank=int(a["size_rank"]),
                input_price=_opt_float(a.get("input_price")),
                output_price=_opt_float(a.get("output_price")),
                mean_output_tokens=_opt_float(a.get("mean_output_tokens")),
            )
            for i, a in enumerate(raw["arms"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"manifest {path}: malformed ({exc})") from exc
    if d_e < 1:
        raise DatasetError(f"manifest {path}: d_e must be positive")
    _check_arms(arms)
    return d_e, arms


def _opt_float(v):
    return None if v is None else float(v)


def write_manifest(path: str | Path, d_e: int, arms: Sequence[ArmId]) -> None:
    payload = {"d_e": d_e, "arms": [a.to_manifest() for a in arms]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _vector(value, length: int, what: str, lineno: int) -> np.ndarray:
    if not isinstance(value, list):
        raise DatasetError(f"{what} must be a list at line {lineno}")
    if len(value) != length:
        raise DatasetError(
            f"{what} has length {len(value)}, expected {length} at line {lineno}"
        )
    try:
        arr = np.array([float(v) for v in value], dtype=float)
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"non-numeric {what} at line {lineno}") from exc
    if not np.all(np.isfinite(arr)):
        raise DatasetError(f"non-finite {what} at line {lineno}")
    return arr


def _make_record(obj: dict, d_e: int, k: int, lineno: int) -> RoutingRecord:
    for key in ("query_id", "embedding", "scores", "costs"):
        if key not in obj:
            raise DatasetError(f"missing field {key!r} at line {lineno}")
    emb = _vector(obj["embedding"], d_e, "embedding", lineno)
    scores = _vector(obj["scores"], k, "scores", lineno)
    costs = _vector(obj["costs"], k, "costs", lineno)
    if np.any(scores < 0.0) or np.any(scores > 1.0):
        raise DatasetError(f"score out of range at line {lineno}")
    if np.any(costs < 0.0):
        raise DatasetError(f"negative cost at line {lineno}")
    tag = obj.get("task_tag")
    return RoutingRecord(
        query_id=str(obj["query_id"]),
        embedding=emb,
        scores=scores,
        costs=costs,
        task_tag=None if tag is None else str(tag),
    )


def load_routing_dataset(
    path: str | Path,
    format: str | None = None,
    manifest: str | Path | None = None,
    split_seed: int = 0,
) -> Dataset:
    """Load and validate a routing dataset.

    ``format`` is ``"jsonl"`` or ``"csv"``; inferred from the suffix when
    omitted. Record order is preserved. Errors name the offending line
    (1-based, counting the CSV header as line 1).
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset not found: {path}")
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    d_e, arms = load_manifest(manifest or manifest_path_for(path))
    k = len(arms)

    records: list[RoutingRecord] = []
    if format == "jsonl":
        with path.open() as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DatasetError(f"invalid JSON at line {lineno}: {exc}") from exc
                if not isinstance(obj, dict):
                    raise DatasetError(f"expected an object at line {lineno}")
                records.append(_make_record(obj, d_e, k, lineno))
    elif format == "csv":
        records = _read_csv(path, d_e, arms)
    else:
        raise DatasetError(f"unknown dataset format {format!r}")

    if not records:
        raise DatasetError("empty dataset")
    return Dataset(records=tuple(records), arms=arms, d_e=d_e, split_seed=split_seed)


def _csv_columns(d_e: int, arms: Sequence[ArmId]) -> list[str]:
    return (
        ["query_id", "task_tag"]
        + [f"e{i}" for i in range(d_e)]
        + [f"score:{a.name}" for a in arms]
        + [f"cost:{a.name}" for a in arms]
    )


def _read_csv(path: Path, d_e: int, arms: Sequence[ArmId]) -> list[RoutingRecord]:
    records = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        expected = _csv_columns(d_e, arms)
        missing = [c for c in expected if c not in (reader.fieldnames or [])]
        if missing:
            raise DatasetError(f"missing field {missing[0]!r} at line 1")
        for lineno, row in enumerate(reader, start=2):
            obj = {
                "query_id": row["query_id"],
                "task_tag": row["task_tag"] or None,
                "embedding": [row[f"e{i}"] for i in range(d_e)],
                "scores": [row[f"score:{a.name}"] for a in arms],
                "costs": [row[f"cost:{a.name}"] for a in arms],
            }
            records.append(_make_record(obj, d_e, len(arms), lineno))
    return records


def write_dataset(
    dataset: Dataset,
    path: str | Path,
    format: str | None = None,
    manifest: str | Path | None = None,
) -> None:
    """Write ``dataset`` and its sidecar manifest."""
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    write_manifest(manifest or manifest_path_for(path), dataset.d_e, dataset.arms)
    if format == "jsonl":
        with path.open("w") as fh:
            for rec in dataset.records:
                fh.write(json.dumps(rec.to_json()) + "\n")
    elif format == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_csv_columns(dataset.d_e, dataset.arms))
            for rec in dataset.records:
                writer.writerow(
                    [rec.query_id, rec.task_tag or ""]
                    + [repr(float(v)) for v in rec.embedding]
                    + [repr(float(v)) for v in rec.scores]
                    + [repr(float(v)) for v in rec.costs]
                )
    else:
        raise DatasetError(f"unknown dataset format {format!r}")


def load_preferences(
    path: str | Path, arms: Sequence[ArmId], d_e: int
) -> list[PreferenceRecord]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"preference file not found: {path}")
    by_name = {a.name: a for a in arms}
    prefs = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"invalid JSON at line {lineno}: {exc}") from exc
            for key in ("query_id", "embedding", "arm_i", "arm_j", "winner"):
                if key not in obj:
                    raise DatasetError(f"missing field {key!r} at line {lineno}")
            try:
                ai, aj, w = (by_name[obj[key]] for key in ("arm_i", "arm_j", "winner"))
            except KeyError as exc:
                raise DatasetError(f"unknown arm {exc.args[0]!r} at line {lineno}") from None
            emb = _vector(obj["embedding"], d_e, "embedding", lineno)
            try:
                prefs.append(PreferenceRecord(str(obj["query_id"]), emb, ai, aj, w))
            except DatasetError as exc:
                raise DatasetError(f"{exc} at line {lineno}") from None
    if not prefs:
        raise DatasetError("empty preference file")
    return prefs


def write_preferences(prefs: Iterable[PreferenceRecord], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for p in prefs:
            obj = {
                "query_id": p.query_id,
                "embedding": [float(v) for v in p.embedding],
                "arm_i": p.arm_i.name,
                "arm_j": p.arm_j.name,
                "winner": p.winner.name,
            }
            fh.write(json.dumps(obj) + "\n")


def split_buckets(
    dataset: Dataset,
    tuning_n: int,
    learn_ratio: int = 10,
    deploy_ratio: int = 1,
    seed: int = 0,
    shuffle: bool = True,
) -> tuple[Dataset, Dataset, Dataset]:
    """Partition into tuning, learning and deployment buckets.

    Tuning takes exactly ``tuning_n`` records; the rest is split
    ``learn_ratio:deploy_ratio`` with the integer-division remainder going to
    the learning bucket.
    """
    n = len(dataset)
    if tuning_n < 0 or tuning_n >= n:
        raise DatasetError(f"tuning_n={tuning_n} must be in [0, {n})")
    if learn_ratio <= 0 or deploy_ratio <= 0:
        raise DatasetError("bucket ratios must be positive")
    order = np.random.default_rng(seed).permutation(n) if shuffle else np.arange(n)
    rest = n - tuning_n
    n_deploy = (rest * deploy_ratio) // (learn_ratio + deploy_ratio)
    n_learn = rest - n_deploy
    tuning = dataset.subset(order[:tuning_n])
    learning = dataset.subset(order[tuning_n : tuning_n + n_learn])
    deployment = dataset.subset(order[tuning_n + n_learn :])
    return tuning, learning, deployment


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


__all__ = [
    "ArmId",
    "Dataset",
    "DatasetError",
    "PreferenceRecord",
    "RoutingRecord",
    "ceil_div",
    "load_manifest",
    "load_preferences",
    "load_routing_dataset",
    "make_arms",
    "manifest_path_for",
    "split_buckets",
    "write_dataset",
    "write_manifest",
    "write_preferences",
]
