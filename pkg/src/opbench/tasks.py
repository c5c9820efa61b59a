"""The six benchmark protocols over (models x datasets).

Every protocol emits one ExperimentRecord per (model, dataset,
parameter, seed).  Trained states are cached by (model, dataset, seed,
subset), so a degenerate parameter (noise 0, fraction 1, test
resolution = train resolution, train = test dataset) evaluates the very
same state through the very same path as the accuracy task and
reproduces its metrics bit for bit.

Wall-clock fields are volatile, so in deterministic mode they are
written as zero on every record except the timing task's, whose
measurements are the payload itself.
"""
from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import BenchmarkError, ConfigurationError
from .grids import DatasetBundle, normalize_array
from .models import ModelSpec, ModelState, param_hash
from .models.base import _assemble_input
from .training import TrainConfig, evaluate, train

TASKS = (
    "accuracy",
    "noise",
    "data-efficiency",
    "super-resolution",
    "ood-swap",
    "timing",
)

# Families that evaluate at unseen resolutions without any change.
SUPER_RESOLUTION_FAMILIES = ("fno", "gnot")

DEFAULT_NOISE_LEVELS = (0.0, 0.005, 0.01, 0.02, 0.04, 0.08, 0.16)
DEFAULT_FRACTIONS = (0.25, 0.5, 1.0)

_NOISE_STREAM = 7211  # namespaces the test-time corruption draws
_SUBSET_STREAM = 4409  # namespaces the nested-subset permutation


def model_label(spec: ModelSpec) -> str:
    """Stable, human-readable identity of a configured model."""
    label = f"{spec.family}-w{spec.width}d{spec.depth}"
    if spec.options:
        label += "[" + ",".join(f"{k}={v}" for k, v in sorted(spec.options)) + "]"
    return label


@dataclass(frozen=True)
class ExperimentRecord:
    """One benchmark measurement; the append-only store's unit.

    ``rel_l2_mean``/``rel_l2_std`` summarize per-sample scores within
    one seed replicate (None when the replicate failed); cross-seed
    aggregation happens at report time.  Records are keyed by
    (model, dataset, task, parameter, seed, config_hash).
    """

    model: str
    dataset: str
    task: str
    parameter: str
    seed: int
    rel_l2_mean: float | None
    rel_l2_std: float | None
    n_excluded: int
    train_seconds: float
    inference_seconds: float
    config_hash: str
    timestamp: str
    flags: tuple[str, ...] = ()
    detail: dict = field(default_factory=dict)

    def key(self) -> tuple:
        return (
            self.model,
            self.dataset,
            self.task,
            self.parameter,
            self.seed,
            self.config_hash,
        )

    @property
    def failed(self) -> bool:
        return self.rel_l2_mean is None


def add_noise(inputs: np.ndarray, level: float, seed: int):
    """Corrupt ``x`` to ``x + level * sigma_x * eta`` per sample.

    ``sigma_x`` is each sample's own standard deviation over all points
    and channels; a zero-variance sample carries no scale for the
    corruption and is returned unchanged, its index reported.  Returns
    ``(corrupted, zero_variance_indices)``.
    """
    if level < 0:
        raise ConfigurationError(f"noise level must be >= 0, got {level}")
    inputs = np.asarray(inputs, dtype=np.float64)
    if level == 0:
        return inputs.copy(), ()
    n = inputs.shape[0]
    flat = inputs.reshape(n, -1)
    sigma = flat.std(axis=1)
    zero_variance = tuple(int(i) for i in np.nonzero(sigma == 0.0)[0])
    rng = np.random.default_rng([_NOISE_STREAM, int(seed)])
    eta = rng.standard_normal(inputs.shape)
    scale = (level * sigma).reshape((n,) + (1,) * (inputs.ndim - 1))
    return inputs + scale * eta, zero_variance


def _level_key(level: float) -> int:
    return int(round(float(level) * 1e9))


def _score_std(per_sample: np.ndarray) -> float:
    finite = per_sample[np.isfinite(per_sample)]
    return float(finite.std())


class Harness:
    """Runs the benchmark protocols against preloaded bundles.

    One instance owns a trained-state cache, the train configuration
    shared by every task, and the config hash stamped on records.
    """

    def __init__(
        self,
        train_config: TrainConfig,
        config_hash: str = "",
        deterministic: bool | None = None,
    ):
        self.train_config = train_config
        self.config_hash = config_hash
        self.deterministic = (
            train_config.deterministic if deterministic is None else deterministic
        )
        self._states: dict[tuple, tuple[ModelState, float]] = {}

    # -- shared plumbing -------------------------------------------------

    def _now(self) -> str:
        if self.deterministic:
            return ""
        return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())

    def _seconds(self, value: float, task: str) -> float:
        if self.deterministic and task != "timing":
            return 0.0
        return float(value)

    def trained_state(
        self,
        spec: ModelSpec,
        bundle: DatasetBundle,
        seed: int,
        subset: np.ndarray | None = None,
    ) -> tuple[ModelState, float]:
        """Train (or fetch) the replicate for one seed; returns the
        state and its training wall time."""
        if subset is not None and np.array_equal(
            np.sort(subset), bundle.splits["train"]
        ):
            subset = None  # the full train split is the accuracy run
        subset_key = None if subset is None else tuple(int(i) for i in subset)
        key = (model_label(spec), bundle.name, int(seed), subset_key)
        if key in self._states:
            return self._states[key]
        train_bundle = bundle
        if subset is not None:
            train_bundle = dataclasses.replace(
                bundle, splits={**bundle.splits, "train": np.asarray(subset)}
            ).with_norm_from_train()
        config = dataclasses.replace(
            self.train_config, seeds=(int(seed),), deterministic=self.deterministic
        )
        result = train(spec, train_bundle, config)
        (outcome,) = result.outcomes
        if outcome.state is None:
            raise BenchmarkError(
                f"seed {seed} diverged at epoch {outcome.last_finite_epoch}"
            )
        self._states[key] = (outcome.state, outcome.wall_time)
        return self._states[key]

    def _measure_eval(self, state: ModelState, bundle: DatasetBundle, split="test"):
        t0 = time.perf_counter()
        result = evaluate(state, bundle, split=split)
        return result, time.perf_counter() - t0

    def _record(
        self,
        *,
        task: str,
        spec: ModelSpec,
        dataset: str,
        parameter: str,
        seed: int,
        result=None,
        train_seconds: float = 0.0,
        inference_seconds: float = 0.0,
        flags: tuple[str, ...] = (),
        detail: dict | None = None,
        error: BenchmarkError | None = None,
    ) -> ExperimentRecord:
        if error is not None:
            flags = flags + (f"failed:{type(error).__name__}",)
            detail = {**(detail or {}), "error": str(error)}
        return ExperimentRecord(
            model=model_label(spec),
            dataset=dataset,
            task=task,
            parameter=parameter,
            seed=int(seed),
            rel_l2_mean=None if error is not None else result.mean_rel_l2,
            rel_l2_std=None if error is not None else _score_std(result.per_sample),
            n_excluded=0 if error is not None else result.n_excluded,
            train_seconds=self._seconds(train_seconds, task),
            inference_seconds=self._seconds(inference_seconds, task),
            config_hash=self.config_hash,
            timestamp=self._now(),
            flags=flags,
            detail=detail or {},
        )

    # -- protocols -------------------------------------------------------

    def run_accuracy(
        self, models: list[ModelSpec], datasets: list[DatasetBundle]
    ) -> list[ExperimentRecord]:
        """One record per (model, dataset, seed) on the clean test split."""
        records = []
        for spec in models:
            for bundle in datasets:
                for seed in self.train_config.seeds:
                    try:
                        state, t_train = self.trained_state(spec, bundle, seed)
                        result, t_inf = self._measure_eval(state, bundle)
                    except BenchmarkError as err:
                        records.append(
                            self._record(
                                task="accuracy",
                                spec=spec,
                                dataset=bundle.name,
                                parameter="",
                                seed=seed,
                                error=err,
                            )
                        )
                        continue
                    records.append(
                        self._record(
                            task="accuracy",
                            spec=spec,
                            dataset=bundle.name,
                            parameter="",
                            seed=seed,
                            result=result,
                            train_seconds=t_train,
                            inference_seconds=t_inf,
                        )
                    )
        return records

    def run_noise(
        self,
        models: list[ModelSpec],
        bundle: DatasetBundle,
        levels=DEFAULT_NOISE_LEVELS,
    ) -> list[ExperimentRecord]:
        """Models train clean; corruption hits test inputs only.

        Level 0 skips the corruption path entirely, so its records
        carry exactly the accuracy metrics.
        """
        for level in levels:
            if level < 0:
                raise ConfigurationError(f"noise level must be >= 0, got {level}")
        records = []
        for spec in models:
            for level in levels:
                for seed in self.train_config.seeds:
                    flags: tuple[str, ...] = ()
                    detail: dict = {}
                    try:
                        state, t_train = self.trained_state(spec, bundle, seed)
                        eval_bundle = bundle
                        if level > 0:
                            test_idx = bundle.splits["test"]
                            # corruption is shared by all models at a given
                            # (seed, level) so their scores are comparable
                            noise_seed = (int(seed) << 32) + _level_key(level)
                            corrupted, zero_var = add_noise(
                                bundle.inputs[test_idx], level, noise_seed
                            )
                            inputs = bundle.inputs.copy()
                            inputs[test_idx] = corrupted
                            eval_bundle = dataclasses.replace(bundle, inputs=inputs)
                            if zero_var:
                                flags = (
                                    f"zero-variance-unchanged:{len(zero_var)}",
                                )
                                detail["zero_variance_samples"] = [
                                    int(test_idx[i]) for i in zero_var
                                ]
                        result, t_inf = self._measure_eval(state, eval_bundle)
                    except BenchmarkError as err:
                        records.append(
                            self._record(
                                task="noise",
                                spec=spec,
                                dataset=bundle.name,
                                parameter=f"gamma={level:g}",
                                seed=seed,
                                error=err,
                            )
                        )
                        continue
                    records.append(
                        self._record(
                            task="noise",
                            spec=spec,
                            dataset=bundle.name,
                            parameter=f"gamma={level:g}",
                            seed=seed,
                            result=result,
                            train_seconds=t_train,
                            inference_seconds=t_inf,
                            flags=flags,
                            detail=detail,
                        )
                    )
        return records

    def nested_subset(
        self, bundle: DatasetBundle, fraction: float, seed: int
    ) -> np.ndarray:
        """Sorted prefix of a fixed per-seed permutation of the train
        split; prefixes nest across fractions by construction."""
        if not 0 < fraction <= 1:
            raise ConfigurationError(
                f"subset fraction must be in (0, 1], got {fraction}"
            )
        train_idx = bundle.splits["train"]
        n_sub = min(int(round(fraction * bundle.n_samples)), len(train_idx))
        if n_sub < 1:
            raise ConfigurationError(
                f"fraction {fraction} of {bundle.n_samples} samples leaves "
                "an empty training subset"
            )
        perm = np.random.default_rng([_SUBSET_STREAM, int(seed)]).permutation(
            len(train_idx)
        )
        return np.sort(train_idx[perm[:n_sub]])

    def run_data_efficiency(
        self,
        models: list[ModelSpec],
        bundle: DatasetBundle,
        fractions=DEFAULT_FRACTIONS,
    ) -> list[ExperimentRecord]:
        """Nested training subsets, identical val/test splits."""
        fractions = tuple(sorted(float(f) for f in fractions))
        records = []
        for seed in self.train_config.seeds:
            subsets = [self.nested_subset(bundle, f, seed) for f in fractions]
            train_set = set(int(i) for i in bundle.splits["train"])
            for small, big in zip(subsets, subsets[1:]):
                small_set = set(int(i) for i in small)
                if not small_set <= set(int(i) for i in big):
                    raise RuntimeError("subset nesting violated")
                if not small_set <= train_set:
                    raise RuntimeError("subset escaped the train split")
        for spec in models:
            for fraction in fractions:
                for seed in self.train_config.seeds:
                    subset = self.nested_subset(bundle, fraction, seed)
                    try:
                        state, t_train = self.trained_state(
                            spec, bundle, seed, subset=subset
                        )
                        eval_bundle = bundle
                        if not np.array_equal(subset, bundle.splits["train"]):
                            eval_bundle = dataclasses.replace(
                                bundle,
                                splits={**bundle.splits, "train": subset},
                            ).with_norm_from_train()
                        result, t_inf = self._measure_eval(state, eval_bundle)
                    except BenchmarkError as err:
                        records.append(
                            self._record(
                                task="data-efficiency",
                                spec=spec,
                                dataset=bundle.name,
                                parameter=f"fraction={fraction:g}",
                                seed=seed,
                                error=err,
                            )
                        )
                        continue
                    records.append(
                        self._record(
                            task="data-efficiency",
                            spec=spec,
                            dataset=bundle.name,
                            parameter=f"fraction={fraction:g}",
                            seed=seed,
                            result=result,
                            train_seconds=t_train,
                            inference_seconds=t_inf,
                            detail={"n_train": int(len(subset))},
                        )
                    )
        return records

    def run_super_resolution(
        self,
        models: list[ModelSpec],
        bundles_by_res: dict[int, DatasetBundle],
        train_res: int,
        test_res_list,
    ) -> list[ExperimentRecord]:
        """Train once at train_res, evaluate zero-shot at each test
        resolution; the parameter hash must never change."""
        for spec in models:
            if spec.family not in SUPER_RESOLUTION_FAMILIES:
                raise ConfigurationError(
                    f"family '{spec.family}' does not evaluate at unseen "
                    f"resolutions without modification; allowed: "
                    f"{SUPER_RESOLUTION_FAMILIES}"
                )
        if train_res not in bundles_by_res:
            raise ConfigurationError(
                f"no bundle at training resolution {train_res}"
            )
        base = bundles_by_res[train_res]
        for res in test_res_list:
            if res not in bundles_by_res:
                raise ConfigurationError(f"no bundle at test resolution {res}")
            if bundles_by_res[res].n_samples != base.n_samples:
                raise ConfigurationError(
                    f"resolution {res} bundle has "
                    f"{bundles_by_res[res].n_samples} samples, expected "
                    f"{base.n_samples} aligned ones"
                )
        records = []
        for spec in models:
            for res in test_res_list:
                for seed in self.train_config.seeds:
                    try:
                        state, t_train = self.trained_state(spec, base, seed)
                        hash_before = param_hash(state)
                        if res == train_res:
                            eval_bundle = base
                        else:
                            fine = bundles_by_res[res]
                            eval_bundle = dataclasses.replace(
                                fine, splits=dict(base.splits), norm=base.norm
                            )
                        result, t_inf = self._measure_eval(state, eval_bundle)
                        if param_hash(state) != hash_before:
                            raise RuntimeError(
                                "parameters changed during zero-shot evaluation"
                            )
                    except BenchmarkError as err:
                        records.append(
                            self._record(
                                task="super-resolution",
                                spec=spec,
                                dataset=base.name,
                                parameter=f"testres={res}",
                                seed=seed,
                                error=err,
                            )
                        )
                        continue
                    records.append(
                        self._record(
                            task="super-resolution",
                            spec=spec,
                            dataset=base.name,
                            parameter=f"testres={res}",
                            seed=seed,
                            result=result,
                            train_seconds=t_train,
                            inference_seconds=t_inf,
                            detail={"param_hash": hash_before},
                        )
                    )
        return records

    def run_ood_swap(
        self, models: list[ModelSpec], pair: tuple[DatasetBundle, DatasetBundle]
    ) -> list[ExperimentRecord]:
        """2x2 grid over a paired (shared-input) dataset couple.

        Each dataset keeps its own normalization statistics; a cross
        cell denormalizes predictions with the TEST dataset's output
        statistics.
        """
        a, b = pair
        if not np.array_equal(a.inputs, b.inputs):
            raise ConfigurationError(
                f"'{a.name}' and '{b.name}' do not share inputs; the swap "
                "protocol needs identical input functions"
            )
        for split in ("train", "val", "test"):
            if not np.array_equal(a.splits[split], b.splits[split]):
                raise ConfigurationError(
                    f"paired bundles disagree on the '{split}' split"
                )
        records = []
        for spec in models:
            for train_bundle in (a, b):
                for test_bundle in (a, b):
                    for seed in self.train_config.seeds:
                        parameter = (
                            f"train={train_bundle.name},test={test_bundle.name}"
                        )
                        try:
                            state, t_train = self.trained_state(
                                spec, train_bundle, seed
                            )
                            result, t_inf = self._measure_eval(
                                state, test_bundle
                            )
                        except BenchmarkError as err:
                            records.append(
                                self._record(
                                    task="ood-swap",
                                    spec=spec,
                                    dataset=train_bundle.name,
                                    parameter=parameter,
                                    seed=seed,
                                    error=err,
                                )
                            )
                            continue
                        records.append(
                            self._record(
                                task="ood-swap",
                                spec=spec,
                                dataset=train_bundle.name,
                                parameter=parameter,
                                seed=seed,
                                result=result,
                                train_seconds=t_train,
                                inference_seconds=t_inf,
                            )
                        )
        return records

    def run_timing(
        self,
        models: list[ModelSpec],
        bundle: DatasetBundle,
        n_samples: int = 200,
        repeats: int = 5,
    ) -> list[ExperimentRecord]:
        """Wall-clock training and inference cost.

        Inference is measured over exactly ``n_samples`` test samples in
        the benchmark batch size, after one excluded warm-up pass;
        ``repeats`` passes are stored and their median reported.
        """
        test_idx = bundle.splits["test"]
        if len(test_idx) < n_samples:
            raise ConfigurationError(
                f"timing needs {n_samples} test samples, split has "
                f"{len(test_idx)}"
            )
        idx = test_idx[:n_samples]
        records = []
        for spec in models:
            for seed in self.train_config.seeds:
                try:
                    state, t_train = self.trained_state(spec, bundle, seed)
                    times = self._timed_inference(state, bundle, idx, repeats)
                except BenchmarkError as err:
                    records.append(
                        self._record(
                            task="timing",
                            spec=spec,
                            dataset=bundle.name,
                            parameter=f"n={n_samples}",
                            seed=seed,
                            error=err,
                        )
                    )
                    continue
                result, _ = self._measure_eval(state, bundle)
                records.append(
                    self._record(
                        task="timing",
                        spec=spec,
                        dataset=bundle.name,
                        parameter=f"n={n_samples}",
                        seed=seed,
                        result=result,
                        train_seconds=t_train,
                        inference_seconds=float(np.median(times)),
                        detail={
                            "repeats": [float(t) for t in times],
                            "n_samples": int(n_samples),
                            "resolution": list(bundle.grid.shape),
                            "batch_size": int(self.train_config.batch_size),
                        },
                    )
                )
        return records

    def _timed_inference(self, state, bundle, idx, repeats: int) -> list[float]:
        import torch

        stats = bundle.norm
        x = normalize_array(
            bundle.inputs[idx], stats.input_mean, stats.input_std
        )
        x = _assemble_input(state, x, bundle.grid).float()
        batch = self.train_config.batch_size
        module = state.module
        module.eval()

        def one_pass():
            with torch.no_grad():
                for lo in range(0, x.shape[0], batch):
                    module(x[lo : lo + batch])

        one_pass()  # warm-up, excluded
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            one_pass()
            times.append(time.perf_counter() - t0)
        return times
