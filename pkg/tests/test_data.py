import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandit_router.data import (
    DatasetError,
    PreferenceRecord,
    load_preferences,
    load_routing_dataset,
    make_arms,
    manifest_path_for,
    split_buckets,
    write_dataset,
    write_preferences,
)


def _write_jsonl(path, rows, d_e=2, arms=("a", "b")):
    manifest = {"d_e": d_e, "arms": [{"name": n, "size_rank": i} for i, n in enumerate(arms)]}
    manifest_path_for(path).write_text(json.dumps(manifest))
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))


def _row(i=0, **kw):
    row = {"query_id": f"q{i}", "embedding": [0.1, 0.2], "scores": [0.5, 1.0], "costs": [1e-3, 2e-3]}
    row.update(kw)
    return row


class TestLoad:
    def test_jsonl_round_trip(self, tiny_dataset, tmp_path):
        p = tmp_path / "d.jsonl"
        write_dataset(tiny_dataset, p)
        back = load_routing_dataset(p)
        assert len(back) == len(tiny_dataset)
        assert back.arms == tiny_dataset.arms
        np.testing.assert_array_equal(back.embeddings, tiny_dataset.embeddings)
        np.testing.assert_array_equal(back.scores, tiny_dataset.scores)
        np.testing.assert_array_equal(back.costs, tiny_dataset.costs)
        assert [r.task_tag for r in back.records] == [r.task_tag for r in tiny_dataset.records]

    def test_rewrite_is_byte_identical(self, tiny_dataset, tmp_path):
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_dataset(tiny_dataset, p1)
        write_dataset(load_routing_dataset(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_csv_round_trip(self, tiny_dataset, tmp_path):
        p = tmp_path / "d.csv"
        write_dataset(tiny_dataset, p)
        back = load_routing_dataset(p)
        np.testing.assert_array_equal(back.costs, tiny_dataset.costs)
        np.testing.assert_array_equal(back.embeddings, tiny_dataset.embeddings)

    def test_scientific_notation(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p_rows = [_row()]
        _write_jsonl(p, p_rows)
        p.write_text(p.read_text().replace("0.001", "1e-3").replace("0.002", "2E-3"))
        assert load_routing_dataset(p).costs[0].tolist() == [1e-3, 2e-3]

    @pytest.mark.parametrize(
        "bad, message",
        [
            ({"scores": [0.5]}, "scores has length 1, expected 2 at line 2"),
            ({"embedding": [0.1, 0.2, 0.3]}, "embedding has length 3, expected 2 at line 2"),
            ({"scores": [0.5, 1.5]}, "score out of range at line 2"),
            ({"costs": [-1.0, 0.0]}, "negative cost at line 2"),
            ({"costs": [1.0, "x"]}, "non-numeric costs at line 2"),
        ],
    )
    def test_schema_errors_name_the_line(self, tmp_path, bad, message):
        p = tmp_path / "d.jsonl"
        _write_jsonl(p, [_row(0), _row(1, **bad)])
        with pytest.raises(DatasetError, match=message):
            load_routing_dataset(p)

    def test_missing_field(self, tmp_path):
        p = tmp_path / "d.jsonl"
        row = _row()
        del row["costs"]
        _write_jsonl(p, [row])
        with pytest.raises(DatasetError, match="missing field 'costs' at line 1"):
            load_routing_dataset(p)

    def test_empty_dataset(self, tmp_path):
        p = tmp_path / "d.jsonl"
        _write_jsonl(p, [])
        with pytest.raises(DatasetError, match="empty"):
            load_routing_dataset(p)

    def test_missing_manifest(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text(json.dumps(_row()) + "\n")
        with pytest.raises(DatasetError, match="manifest not found"):
            load_routing_dataset(p)

    def test_duplicate_size_rank_rejected(self):
        with pytest.raises(DatasetError, match="size_rank"):
            make_arms(["a", "b"], [1, 1])


class TestPreferences:
    def test_round_trip(self, tmp_path):
        arms = make_arms(["a", "b", "c"])
        prefs = [PreferenceRecord("p0", np.array([1.0, 2.0]), arms[0], arms[2], arms[2])]
        p = tmp_path / "p.jsonl"
        write_preferences(prefs, p)
        back = load_preferences(p, arms, 2)
        assert back[0].winner == arms[2]
        np.testing.assert_array_equal(back[0].embedding, prefs[0].embedding)

    def test_winner_must_participate(self):
        arms = make_arms(["a", "b", "c"])
        with pytest.raises(DatasetError, match="not one of the compared arms"):
            PreferenceRecord("p", np.zeros(2), arms[0], arms[1], arms[2])

    def test_unknown_arm(self, tmp_path):
        arms = make_arms(["a", "b"])
        p = tmp_path / "p.jsonl"
        p.write_text(json.dumps({"query_id": "p", "embedding": [0, 0], "arm_i": "a", "arm_j": "z", "winner": "a"}) + "\n")
        with pytest.raises(DatasetError, match="unknown arm 'z' at line 1"):
            load_preferences(p, arms, 2)


class TestSplit:
    def test_sizes_with_remainder_to_learning(self, tiny_dataset):
        # DERIVED: 30 - 8 = 22 records; 22 // 11 = 2 to deployment, 20 to learning
        t, l, d = split_buckets(tiny_dataset, 8)
        assert (len(t), len(l), len(d)) == (8, 20, 2)

    def test_split_1201(self, small_world):
        data = small_world.routing_dataset(1201, seed=0)
        t, l, d = split_buckets(data, 101)
        assert (len(t), len(l), len(d)) == (101, 1000, 100)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), tuning_n=st.integers(0, 29), shuffle=st.booleans())
    def test_partition_property(self, tiny_dataset, seed, tuning_n, shuffle):
        buckets = split_buckets(tiny_dataset, tuning_n, seed=seed, shuffle=shuffle)
        ids = [r.query_id for b in buckets for r in b.records]
        assert sorted(ids) == sorted(r.query_id for r in tiny_dataset.records)
        assert len(set(ids)) == len(ids)

    def test_seeded_determinism(self, tiny_dataset):
        a = split_buckets(tiny_dataset, 5, seed=3)
        b = split_buckets(tiny_dataset, 5, seed=3)
        assert [r.query_id for r in a[1].records] == [r.query_id for r in b[1].records]

    def test_invalid_tuning_size(self, tiny_dataset):
        with pytest.raises(DatasetError):
            split_buckets(tiny_dataset, 30)
