"""Suite configuration: file parsing, canonical form, and hashing.

A suite file (YAML or JSON) declares datasets, models, training
settings, and the task list.  Its canonical serialization is a
sorted-key compact JSON string; the config hash over that string keys
every record a run produces, so two runs are comparable exactly when
their hashes agree.  The output directory is excluded from the hash:
where results land does not change what they are.
"""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .container import canonical_json
from .datagen.generate import GENERATED_DATASETS
from .errors import ConfigurationError
from .models import ModelSpec
from .tasks import TASKS
from .training import TrainConfig

INGESTED_DATASETS = ("shear", "biaxial")
ALL_DATASETS = GENERATED_DATASETS + INGESTED_DATASETS

# Parameters each task accepts beyond the shared model/dataset lists.
_TASK_PARAMS = {
    "accuracy": {"datasets"},
    "noise": {"dataset", "levels"},
    "data-efficiency": {"dataset", "fractions"},
    "super-resolution": {
        "dataset",
        "train_resolution",
        "test_resolutions",
        "families",
    },
    "ood-swap": {"pair"},
    "timing": {"dataset", "n_samples", "repeats"},
}


@dataclass(frozen=True)
class DatasetConfig:
    """One dataset to generate (or ingest) for the suite."""

    name: str
    count: int = 100
    solver: dict = field(default_factory=dict)  # SolverConfig overrides
    path: str | None = None  # ingest-only: source file
    adapter: str | None = None  # ingest-only: 'hdf5' or 'text'

    def __post_init__(self):
        if self.name not in ALL_DATASETS:
            raise ConfigurationError(
                f"unknown dataset '{self.name}'; supported: {ALL_DATASETS}"
            )
        if self.count < 1:
            raise ConfigurationError(f"count must be >= 1, got {self.count}")
        if self.name in INGESTED_DATASETS:
            if not self.path or not self.adapter:
                raise ConfigurationError(
                    f"dataset '{self.name}' is ingest-only and needs "
                    "'path' and 'adapter'"
                )
        elif self.path or self.adapter:
            raise ConfigurationError(
                f"dataset '{self.name}' is generated; 'path'/'adapter' "
                "do not apply"
            )

    def to_dict(self) -> dict:
        out = {"name": self.name, "count": self.count}
        if self.solver:
            out["solver"] = dict(sorted(self.solver.items()))
        if self.path:
            out["path"] = self.path
            out["adapter"] = self.adapter
        return out


@dataclass(frozen=True)
class TaskSpec:
    """One protocol invocation with its parameters."""

    task: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigurationError(
                f"unknown task '{self.task}'; supported: {TASKS}"
            )
        unknown = set(self.params) - _TASK_PARAMS[self.task]
        if unknown:
            raise ConfigurationError(
                f"task '{self.task}' does not accept {sorted(unknown)}; "
                f"allowed: {sorted(_TASK_PARAMS[self.task])}"
            )

    def to_dict(self) -> dict:
        out = {"task": self.task}
        if self.params:
            out["params"] = _plain(self.params)
        return out


def _plain(value):
    """Recursively reduce to canonically ordered plain JSON types."""
    if isinstance(value, dict):
        return {str(k): _plain(value[k]) for k in sorted(value)}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (str, bool, int, float)) or value is None:
        return value
    raise ConfigurationError(
        f"config values must be plain data, got {type(value).__name__}"
    )


@dataclass(frozen=True)
class SuiteConfig:
    """Everything a benchmark run depends on, in hashable form."""

    datasets: tuple[DatasetConfig, ...]
    models: tuple[ModelSpec, ...]
    train: TrainConfig
    tasks: tuple[TaskSpec, ...] = ()
    master_seed: int = 0
    deterministic: bool = True
    split_fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    out_dir: str | None = None  # excluded from the hash

    def __post_init__(self):
        if not self.datasets:
            raise ConfigurationError("at least one dataset is required")
        if not self.models:
            raise ConfigurationError("at least one model is required")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate dataset names in {names}")
        known = set(names)
        for task in self.tasks:
            for key in ("dataset",):
                if key in task.params and task.params[key] not in known:
                    raise ConfigurationError(
                        f"task '{task.task}' references dataset "
                        f"'{task.params[key]}' which the suite does not "
                        "declare"
                    )
            if "pair" in task.params:
                pair = tuple(task.params["pair"])
                if len(pair) != 2 or not set(pair) <= known:
                    raise ConfigurationError(
                        f"'pair' must name two declared datasets, got {pair}"
                    )
            if "datasets" in task.params:
                extra = set(task.params["datasets"]) - known
                if extra:
                    raise ConfigurationError(
                        f"task '{task.task}' references undeclared datasets "
                        f"{sorted(extra)}"
                    )

    def to_dict(self) -> dict:
        return {
            "datasets": [d.to_dict() for d in self.datasets],
            "models": [
                {
                    "family": m.family,
                    "width": m.width,
                    "depth": m.depth,
                    "options": {k: v for k, v in m.options},
                }
                for m in self.models
            ],
            "train": dataclasses.asdict(self.train),
            "tasks": [t.to_dict() for t in self.tasks],
            "master_seed": self.master_seed,
            "deterministic": self.deterministic,
            "split_fractions": list(self.split_fractions),
        }

    def canonical(self) -> str:
        return canonical_json(self.to_dict())

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def with_overrides(
        self,
        master_seed: int | None = None,
        deterministic: bool | None = None,
        out_dir: str | None = None,
    ) -> "SuiteConfig":
        """Apply command-line overrides; None keeps the file's value."""
        changes = {}
        if master_seed is not None:
            changes["master_seed"] = int(master_seed)
        if deterministic is not None:
            changes["deterministic"] = bool(deterministic)
            changes["train"] = dataclasses.replace(
                self.train, deterministic=bool(deterministic)
            )
        if out_dir is not None:
            changes["out_dir"] = str(out_dir)
        return dataclasses.replace(self, **changes) if changes else self


def _take(d: dict, allowed: set[str], what: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigurationError(
            f"unknown {what} keys {sorted(unknown)}; allowed: {sorted(allowed)}"
        )


def suite_from_dict(raw: dict) -> SuiteConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("suite config must be a mapping")
    _take(
        raw,
        {
            "datasets",
            "models",
            "train",
            "tasks",
            "master_seed",
            "deterministic",
            "split_fractions",
            "out_dir",
        },
        "suite config",
    )
    datasets = []
    for entry in raw.get("datasets", ()):
        _take(set(entry), {"name", "count", "solver", "path", "adapter"}, "dataset")
        datasets.append(DatasetConfig(**entry))
    models = []
    for entry in raw.get("models", ()):
        if isinstance(entry, str):
            models.append(ModelSpec.make(entry))
            continue
        _take(set(entry), {"family", "width", "depth", "options"}, "model")
        if "family" not in entry:
            raise ConfigurationError(f"model entry needs a 'family': {entry}")
        models.append(
            ModelSpec.make(
                entry["family"],
                width=entry.get("width", 32),
                depth=entry.get("depth", 4),
                **entry.get("options", {}),
            )
        )
    train_raw = dict(raw.get("train", {}))
    try:
        train = TrainConfig(**train_raw)
    except TypeError as err:
        raise ConfigurationError(f"bad train section: {err}") from None
    tasks = []
    for entry in raw.get("tasks", ()):
        if isinstance(entry, str):
            tasks.append(TaskSpec(task=entry))
            continue
        _take(set(entry), {"task", "params"}, "task")
        tasks.append(TaskSpec(task=entry["task"], params=entry.get("params", {})))
    fractions = raw.get("split_fractions", (0.8, 0.1, 0.1))
    return SuiteConfig(
        datasets=tuple(datasets),
        models=tuple(models),
        train=train,
        tasks=tuple(tasks),
        master_seed=int(raw.get("master_seed", 0)),
        deterministic=bool(raw.get("deterministic", True)),
        split_fractions=tuple(float(f) for f in fractions),
        out_dir=raw.get("out_dir"),
    )


def load_suite(path: str | Path) -> SuiteConfig:
    """Parse a YAML (or JSON) suite file."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as err:
        raise ConfigurationError(f"cannot parse {path}: {err}") from None
    return suite_from_dict(raw)
