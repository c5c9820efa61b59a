"""Append-only results store.

A store directory holds a newline-delimited record log in canonical
JSON (one record per line, sorted keys, compact separators), a
checkpoint directory, and a dataset cache.  Appends take an advisory
file lock so there is a single writer at a time; readers never lock.
Records are keyed by (model, dataset, task, parameter, seed,
config_hash); appending an existing key raises DuplicateRecordError
carrying the stored record.
"""
from __future__ import annotations

import json
from pathlib import Path

from filelock import FileLock

from .errors import ConfigurationError, DuplicateRecordError, IntegrityError
from .tasks import ExperimentRecord

RECORD_FIELDS = (
    "model",
    "dataset",
    "task",
    "parameter",
    "seed",
    "rel_l2_mean",
    "rel_l2_std",
    "n_excluded",
    "train_seconds",
    "inference_seconds",
    "config_hash",
    "timestamp",
    "flags",
    "detail",
)

FILTER_KEYS = ("model", "dataset", "task", "parameter", "seed", "config")


def record_to_line(record: ExperimentRecord) -> str:
    payload = {
        "model": record.model,
        "dataset": record.dataset,
        "task": record.task,
        "parameter": record.parameter,
        "seed": record.seed,
        "rel_l2_mean": record.rel_l2_mean,
        "rel_l2_std": record.rel_l2_std,
        "n_excluded": record.n_excluded,
        "train_seconds": record.train_seconds,
        "inference_seconds": record.inference_seconds,
        "config_hash": record.config_hash,
        "timestamp": record.timestamp,
        "flags": list(record.flags),
        "detail": record.detail,
    }
    return json.dumps(
        payload, sort_keys=True, separators=(",", ":"), allow_nan=False
    )


def record_from_line(line: str) -> ExperimentRecord:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as err:
        raise IntegrityError(f"corrupt record line: {err}") from None
    missing = set(RECORD_FIELDS) - set(payload)
    if missing:
        raise IntegrityError(f"record line lacks fields {sorted(missing)}")
    return ExperimentRecord(
        model=payload["model"],
        dataset=payload["dataset"],
        task=payload["task"],
        parameter=payload["parameter"],
        seed=int(payload["seed"]),
        rel_l2_mean=payload["rel_l2_mean"],
        rel_l2_std=payload["rel_l2_std"],
        n_excluded=int(payload["n_excluded"]),
        train_seconds=float(payload["train_seconds"]),
        inference_seconds=float(payload["inference_seconds"]),
        config_hash=payload["config_hash"],
        timestamp=payload["timestamp"],
        flags=tuple(payload["flags"]),
        detail=payload["detail"],
    )


class ResultStore:
    """One run directory: record log, checkpoints, dataset cache."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.records_path = self.root / "records.jsonl"
        self.checkpoint_dir = self.root / "checkpoints"
        self.dataset_dir = self.root / "datasets"
        self.checkpoint_dir.mkdir(exist_ok=True)
        self.dataset_dir.mkdir(exist_ok=True)
        self._lock = FileLock(str(self.root / "records.lock"))

    # -- reading (no lock) -----------------------------------------------

    def records(self, **filters) -> list[ExperimentRecord]:
        """All records, in append order, optionally filtered by
        model/dataset/task/parameter/seed/config equality."""
        unknown = set(filters) - set(FILTER_KEYS)
        if unknown:
            raise ConfigurationError(
                f"unknown filter keys {sorted(unknown)}; "
                f"allowed: {list(FILTER_KEYS)}"
            )
        out = []
        for record in self._read_all():
            if "model" in filters and record.model != filters["model"]:
                continue
            if "dataset" in filters and record.dataset != filters["dataset"]:
                continue
            if "task" in filters and record.task != filters["task"]:
                continue
            if (
                "parameter" in filters
                and record.parameter != filters["parameter"]
            ):
                continue
            if "seed" in filters and record.seed != int(filters["seed"]):
                continue
            if (
                "config" in filters
                and record.config_hash != filters["config"]
            ):
                continue
            out.append(record)
        return out

    def _read_all(self) -> list[ExperimentRecord]:
        if not self.records_path.exists():
            return []
        records = []
        with open(self.records_path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(record_from_line(line))
        return records

    def __len__(self) -> int:
        return len(self._read_all())

    def log_bytes(self) -> bytes:
        """The raw record log, for byte-level comparisons."""
        if not self.records_path.exists():
            return b""
        return self.records_path.read_bytes()

    # -- writing (advisory lock) -------------------------------------------

    def append(self, record: ExperimentRecord) -> None:
        with self._lock:
            existing = {r.key(): r for r in self._read_all()}
            prior = existing.get(record.key())
            if prior is not None:
                raise DuplicateRecordError(
                    f"record {record.key()} already stored", existing=prior
                )
            with open(self.records_path, "a") as fh:
                fh.write(record_to_line(record) + "\n")

    def extend(self, records, skip_duplicates: bool = False) -> tuple[int, int]:
        """Append many; returns (added, skipped).  Duplicates raise
        unless skip_duplicates, which makes re-runs idempotent."""
        with self._lock:
            existing = {r.key() for r in self._read_all()}
            added = skipped = 0
            with open(self.records_path, "a") as fh:
                for record in records:
                    if record.key() in existing:
                        if not skip_duplicates:
                            raise DuplicateRecordError(
                                f"record {record.key()} already stored"
                            )
                        skipped += 1
                        continue
                    fh.write(record_to_line(record) + "\n")
                    existing.add(record.key())
                    added += 1
        return added, skipped
