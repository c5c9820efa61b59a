"""Config-driven execution: datasets in, records out.

Bundles are built deterministically from (dataset config, master seed)
and cached in the store's dataset directory as containers; a cached
bundle is reused only when its sample count, resolution, and master
seed all match the request, so edited configs rebuild instead of
silently serving stale data.
"""
from __future__ import annotations

import dataclasses

from .config import DatasetConfig, SuiteConfig, TaskSpec
from .container import load_bundle, save_bundle
from .datagen.common import default_config
from .datagen.generate import GENERATED_DATASETS, generate_dataset
from .datagen.ingest import ingest_external
from .errors import ConfigurationError
from .grids import DatasetBundle
from .store import ResultStore
from .tasks import (
    DEFAULT_FRACTIONS,
    DEFAULT_NOISE_LEVELS,
    SUPER_RESOLUTION_FAMILIES,
    Harness,
)
from .training import split_dataset


def build_bundle(
    ds: DatasetConfig,
    master_seed: int,
    split_fractions=(0.8, 0.1, 0.1),
    resolution: int | None = None,
) -> DatasetBundle:
    """Generate (or ingest) one dataset, split it, and attach
    normalization statistics from its train split."""
    if ds.name in GENERATED_DATASETS:
        solver = default_config(ds.name)
        overrides = dict(ds.solver)
        if resolution is not None:
            overrides["resolution"] = int(resolution)
        if overrides:
            try:
                solver = dataclasses.replace(solver, **overrides)
            except TypeError as err:
                raise ConfigurationError(
                    f"bad solver overrides for '{ds.name}': {err}"
                ) from None
        bundle = generate_dataset(ds.name, ds.count, solver, seed=master_seed)
    else:
        if resolution is not None:
            raise ConfigurationError(
                f"'{ds.name}' is ingested; resolution cannot be overridden"
            )
        bundle = ingest_external(ds.path, ds.adapter, name=ds.name)
    splits = split_dataset(
        bundle.n_samples, fractions=split_fractions, seed=master_seed
    )
    return dataclasses.replace(bundle, splits=splits).with_norm_from_train()


def _cache_name(ds: DatasetConfig, resolution: int | None) -> str:
    if resolution is None:
        return ds.name
    return f"{ds.name}-r{resolution}"


def _cache_valid(
    bundle: DatasetBundle,
    ds: DatasetConfig,
    config: SuiteConfig,
    resolution: int | None,
) -> bool:
    if ds.name not in GENERATED_DATASETS:
        return True  # ingested data has one source; the checksum guards it
    if bundle.n_samples != ds.count:
        return False
    if bundle.pde_meta.get("seed") != config.master_seed:
        return False
    expected = resolution
    if expected is None:
        expected = int(
            ds.solver.get("resolution", default_config(ds.name).resolution)
        )
    return bundle.grid.shape[0] == expected


def ensure_bundle(
    store: ResultStore,
    ds: DatasetConfig,
    config: SuiteConfig,
    resolution: int | None = None,
    rebuild: bool = False,
) -> DatasetBundle:
    """Fetch from the store's dataset cache or build and cache."""
    name = _cache_name(ds, resolution)
    path = store.dataset_dir / name
    if not rebuild and (path / "manifest.json").exists():
        bundle = load_bundle(path)
        if _cache_valid(bundle, ds, config, resolution):
            return bundle
    bundle = build_bundle(
        ds, config.master_seed, config.split_fractions, resolution=resolution
    )
    if resolution is not None:
        bundle = dataclasses.replace(bundle, name=name)
    save_bundle(bundle, path)
    return bundle


def _dataset_config(config: SuiteConfig, name: str) -> DatasetConfig:
    for ds in config.datasets:
        if ds.name == name:
            return ds
    raise ConfigurationError(f"suite does not declare dataset '{name}'")


def _require(params: dict, key: str, task: str):
    if key not in params:
        raise ConfigurationError(f"task '{task}' needs a '{key}' parameter")
    return params[key]


def run_task(
    task: TaskSpec,
    harness: Harness,
    config: SuiteConfig,
    bundles: dict[str, DatasetBundle],
    store: ResultStore,
):
    """Dispatch one task spec to its protocol."""
    p = task.params
    models = list(config.models)
    if task.task == "accuracy":
        names = p.get("datasets") or [d.name for d in config.datasets]
        return harness.run_accuracy(models, [bundles[n] for n in names])
    if task.task == "noise":
        dataset = _require(p, "dataset", task.task)
        levels = tuple(float(v) for v in p.get("levels", DEFAULT_NOISE_LEVELS))
        return harness.run_noise(models, bundles[dataset], levels=levels)
    if task.task == "data-efficiency":
        dataset = _require(p, "dataset", task.task)
        fractions = tuple(
            float(v) for v in p.get("fractions", DEFAULT_FRACTIONS)
        )
        return harness.run_data_efficiency(
            models, bundles[dataset], fractions=fractions
        )
    if task.task == "super-resolution":
        dataset = _require(p, "dataset", task.task)
        test_res = [int(r) for r in _require(p, "test_resolutions", task.task)]
        ds = _dataset_config(config, dataset)
        base_res = default_config(dataset).resolution
        base_res = int(ds.solver.get("resolution", base_res))
        train_res = int(p.get("train_resolution", base_res))
        families = tuple(
            p.get("families", SUPER_RESOLUTION_FAMILIES)
        )
        chosen = [m for m in models if m.family in families]
        if not chosen:
            raise ConfigurationError(
                f"no configured model is in families {families}"
            )
        by_res = {}
        for res in {train_res, *test_res}:
            if res == base_res:
                by_res[res] = bundles[dataset]
            else:
                by_res[res] = ensure_bundle(store, ds, config, resolution=res)
        return harness.run_super_resolution(chosen, by_res, train_res, test_res)
    if task.task == "ood-swap":
        pair = tuple(_require(p, "pair", task.task))
        return harness.run_ood_swap(models, (bundles[pair[0]], bundles[pair[1]]))
    if task.task == "timing":
        dataset = _require(p, "dataset", task.task)
        return harness.run_timing(
            models,
            bundles[dataset],
            n_samples=int(p.get("n_samples", 200)),
            repeats=int(p.get("repeats", 5)),
        )
    raise ConfigurationError(f"unknown task '{task.task}'")


def run_suite(config: SuiteConfig, store: ResultStore):
    """Run every configured task; returns (records, added, skipped).

    Records are appended to the store with duplicate keys skipped, so
    re-running the same config is idempotent.
    """
    train = dataclasses.replace(
        config.train, deterministic=config.deterministic
    )
    harness = Harness(
        train,
        config_hash=config.config_hash(),
        deterministic=config.deterministic,
    )
    bundles = {
        ds.name: ensure_bundle(store, ds, config) for ds in config.datasets
    }
    records = []
    for task in config.tasks:
        records.extend(run_task(task, harness, config, bundles, store))
    added, skipped = store.extend(records, skip_duplicates=True)
    return records, added, skipped
