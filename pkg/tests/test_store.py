"""Append-only record store: canonical lines, dedup, filters."""
import json

import pytest

from opbench.errors import ConfigurationError, DuplicateRecordError
from opbench.store import ResultStore, record_from_line, record_to_line
from opbench.tasks import ExperimentRecord


def make_record(**overrides):
    base = dict(
        model="fno-w8d1",
        dataset="burgers",
        task="accuracy",
        parameter="",
        seed=0,
        rel_l2_mean=0.0108,
        rel_l2_std=0.0006,
        n_excluded=0,
        train_seconds=0.0,
        inference_seconds=0.0,
        config_hash="abc123",
        timestamp="",
        flags=(),
        detail={},
    )
    base.update(overrides)
    return ExperimentRecord(**base)


class TestSerialization:
    def test_round_trip(self):
        rec = make_record(
            flags=("zero-variance-unchanged:1",),
            detail={"zero_variance_samples": [3], "repeats": [0.1, 0.2]},
        )
        assert record_from_line(record_to_line(rec)) == rec

    def test_failed_record_round_trip(self):
        rec = make_record(
            rel_l2_mean=None,
            rel_l2_std=None,
            flags=("failed:TrainingDivergedError",),
            detail={"error": "loss became non-finite"},
        )
        loaded = record_from_line(record_to_line(rec))
        assert loaded.failed
        assert loaded == rec

    def test_line_is_canonical(self):
        line = record_to_line(make_record())
        payload = json.loads(line)
        assert line == json.dumps(
            payload, sort_keys=True, separators=(",", ":")
        )
        assert "\n" not in line

    def test_corrupt_line_rejected(self):
        from opbench.errors import IntegrityError

        with pytest.raises(IntegrityError, match="corrupt"):
            record_from_line("{not json")
        with pytest.raises(IntegrityError, match="lacks"):
            record_from_line('{"model": "fnn"}')


class TestStore:
    def test_append_and_read_in_order(self, tmp_path):
        store = ResultStore(tmp_path / "run")
        first = make_record(seed=0)
        second = make_record(seed=1)
        store.append(first)
        store.append(second)
        assert store.records() == [first, second]
        assert len(store) == 2

    def test_reopen_sees_existing_records(self, tmp_path):
        root = tmp_path / "run"
        ResultStore(root).append(make_record())
        assert len(ResultStore(root)) == 1

    def test_duplicate_rejected_with_pointer(self, tmp_path):
        store = ResultStore(tmp_path / "run")
        original = make_record()
        store.append(original)
        clone = make_record(rel_l2_mean=0.9)  # same key, new metrics
        with pytest.raises(DuplicateRecordError) as excinfo:
            store.append(clone)
        assert excinfo.value.existing == original
        assert len(store) == 1

    def test_different_parameter_is_a_new_key(self, tmp_path):
        store = ResultStore(tmp_path / "run")
        store.append(make_record(task="noise", parameter="gamma=0"))
        store.append(make_record(task="noise", parameter="gamma=0.01"))
        assert len(store) == 2

    def test_extend_skip_duplicates(self, tmp_path):
        store = ResultStore(tmp_path / "run")
        records = [make_record(seed=s) for s in range(3)]
        added, skipped = store.extend(records)
        assert (added, skipped) == (3, 0)
        added, skipped = store.extend(records, skip_duplicates=True)
        assert (added, skipped) == (0, 3)
        with pytest.raises(DuplicateRecordError):
            store.extend(records)

    def test_filters(self, tmp_path):
        store = ResultStore(tmp_path / "run")
        store.append(make_record(seed=0, task="accuracy"))
        store.append(make_record(seed=1, task="accuracy"))
        store.append(make_record(seed=0, task="noise", parameter="gamma=0"))
        assert len(store.records(task="accuracy")) == 2
        assert len(store.records(seed=1)) == 1
        assert len(store.records(task="noise", seed=0)) == 1
        assert store.records(dataset="darcy") == []
        assert len(store.records(config="abc123")) == 3

    def test_unknown_filter_key(self, tmp_path):
        store = ResultStore(tmp_path / "run")
        with pytest.raises(ConfigurationError, match="unknown filter"):
            store.records(flavor="x")

    def test_log_bytes_round_trip(self, tmp_path):
        store = ResultStore(tmp_path / "run")
        assert store.log_bytes() == b""
        rec = make_record()
        store.append(rec)
        assert store.log_bytes() == (record_to_line(rec) + "\n").encode()

    def test_store_layout(self, tmp_path):
        store = ResultStore(tmp_path / "run")
        assert store.checkpoint_dir.is_dir()
        assert store.dataset_dir.is_dir()
