"""Training protocol: splits, optimization, checkpointing, scoring.

Minimization happens in normalized space (per-sample relative L2 with a
clamped denominator); all reported accuracy comes from denormalized
predictions against raw targets.  Each configured seed trains an
independent replicate; the checkpoint with the best validation metric
is the one returned, never the last epoch's.

Evaluation iterates samples one at a time.  Batched CPU kernels
(convolution, FFT) are not bit-stable across batch shapes, so scoring
per sample is what makes the dataset mean exactly independent of any
batching choice.
"""
from __future__ import annotations

import copy
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import (
    ConfigurationError,
    DegenerateReferenceError,
    TrainingDivergedError,
)
from .grids import (
    DatasetBundle,
    denormalize_array,
    normalize_array,
    relative_l2,
)
from .models import ModelSpec, ModelState, build_model, predict
from .models.base import _assemble_input
from .models.cgan import cgan_train_step

OPTIMIZERS = ("adaptive-moment", "adaptive-moment-decoupled-decay")
SCHEDULES = ("step", "one-cycle")

_LR_MIN, _LR_MAX = 1e-5, 1e-1
_SHUFFLE_STREAM = 9973  # namespaces the per-epoch batch shuffle


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adaptive-moment"
    learning_rate: float = 1e-3
    schedule: str = "step"
    epochs: int = 500
    batch_size: int = 20
    seeds: tuple[int, ...] = (0, 1, 2)
    grad_clip: float | None = None
    deterministic: bool = True

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(
                f"optimizer '{self.optimizer}' not in {OPTIMIZERS}"
            )
        if self.schedule not in SCHEDULES:
            raise ConfigurationError(f"schedule '{self.schedule}' not in {SCHEDULES}")
        if not _LR_MIN <= self.learning_rate <= _LR_MAX:
            raise ConfigurationError(
                f"learning rate {self.learning_rate} outside "
                f"[{_LR_MIN}, {_LR_MAX}]"
            )
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(
                f"batch size must be >= 1, got {self.batch_size}"
            )
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ConfigurationError("at least one seed is required")
        object.__setattr__(self, "seeds", seeds)
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ConfigurationError(
                f"grad_clip must be positive, got {self.grad_clip}"
            )


def split_dataset(bundle, fractions=(0.8, 0.1, 0.1), seed: int = 0):
    """Deterministic shuffled train/val/test partition.

    val and test sizes are floored; every remainder sample goes to
    train.  Accepts a bundle or a plain sample count.
    """
    n = bundle if isinstance(bundle, int) else bundle.n_samples
    if len(fractions) != 3:
        raise ConfigurationError(
            f"need (train, val, test) fractions, got {len(fractions)}"
        )
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(f"fractions {fractions} do not sum to 1")
    if any(f <= 0 for f in fractions):
        raise ConfigurationError(f"fractions must be positive, got {fractions}")
    n_val = int(math.floor(fractions[1] * n))
    n_test = int(math.floor(fractions[2] * n))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ConfigurationError(
            f"{n} samples cannot fill nonempty splits at fractions {fractions}"
        )
    perm = np.random.default_rng(seed).permutation(n)
    return {
        "train": np.sort(perm[:n_train]),
        "val": np.sort(perm[n_train : n_train + n_val]),
        "test": np.sort(perm[n_train + n_val :]),
    }


def schedule_factor(schedule: str, epoch: int, total_epochs: int) -> float:
    """Learning-rate multiplier for a (0-based) epoch."""
    if schedule == "step":
        return 0.5 ** (epoch // 100)
    warm = max(1, round(0.3 * total_epochs))
    if epoch < warm:
        return (epoch + 1) / warm
    if total_epochs <= warm:
        return 1.0
    t = (epoch - warm) / (total_epochs - warm)
    return 0.5 * (1.0 + math.cos(math.pi * t))


@contextmanager
def deterministic_mode():
    """Single-threaded torch so repeated runs are bit-identical."""
    n_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        yield
    finally:
        torch.set_num_threads(n_threads)


def _torch_rel_l2(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    flat_p = pred.reshape(pred.shape[0], -1)
    flat_t = target.reshape(target.shape[0], -1)
    num = torch.linalg.vector_norm(flat_p - flat_t, dim=1)
    den = torch.linalg.vector_norm(flat_t, dim=1).clamp_min(1e-12)
    return (num / den).mean()


def _normalized_metric(module: torch.nn.Module, x: torch.Tensor, y: torch.Tensor) -> float:
    was_training = module.training
    module.eval()
    with torch.no_grad():
        value = float(_torch_rel_l2(module(x), y))
    if was_training:
        module.train()
    return value


@dataclass
class SeedOutcome:
    """One replicate: trained state (None if the seed diverged), curves,
    checkpoint provenance, and wall-clock time."""

    seed: int
    state: ModelState | None
    train_curve: tuple[float, ...]
    val_curve: tuple[float, ...]
    best_epoch: int | None
    wall_time: float
    last_finite_epoch: int | None = None

    @property
    def diverged(self) -> bool:
        return self.state is None


@dataclass
class TrainResult:
    spec: ModelSpec
    config: TrainConfig
    outcomes: list[SeedOutcome] = field(default_factory=list)

    @property
    def states(self) -> list[ModelState]:
        return [o.state for o in self.outcomes if o.state is not None]


def summarize_seeds(values) -> tuple[float, float]:
    """Mean and (population) standard deviation over seed replicates;
    identical replicates report a std of exactly 0."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ConfigurationError("no seed metrics to summarize")
    return float(arr.mean()), float(arr.std())


def _require_ready(bundle: DatasetBundle) -> None:
    if bundle.norm is None:
        raise ConfigurationError(
            "bundle has no normalization statistics; attach them from the "
            "train split first"
        )
    for name in ("train", "val"):
        if name not in bundle.splits:
            raise ConfigurationError(f"bundle is missing the '{name}' split")


def _make_optimizer(config: TrainConfig, params):
    if config.optimizer == "adaptive-moment":
        return torch.optim.Adam(params, lr=config.learning_rate)
    return torch.optim.AdamW(params, lr=config.learning_rate)


def _train_one_seed(
    spec: ModelSpec, bundle: DatasetBundle, config: TrainConfig, seed: int
) -> SeedOutcome:
    t_start = time.perf_counter()
    stats = bundle.norm
    norm_in = normalize_array(bundle.inputs, stats.input_mean, stats.input_std)
    norm_out = normalize_array(bundle.outputs, stats.output_mean, stats.output_std)
    tr, va = bundle.splits["train"], bundle.splits["val"]

    build_kwargs = {}
    if spec.family == "pod-deeponet":
        build_kwargs["train_outputs"] = norm_out[tr]
    state = build_model(
        spec,
        bundle.in_channels,
        bundle.out_channels,
        bundle.grid,
        seed=seed,
        time_dependent=bundle.time_meta is not None,
        **build_kwargs,
    )
    module = state.module

    x_tr = _assemble_input(state, norm_in[tr], bundle.grid).float()
    y_tr = torch.from_numpy(norm_out[tr]).float()
    x_va = _assemble_input(state, norm_in[va], bundle.grid).float()
    y_va = torch.from_numpy(norm_out[va]).float()

    is_adversarial = spec.family == "cgan"
    if is_adversarial:
        opt_g = _make_optimizer(config, module.generator.parameters())
        opt_d = _make_optimizer(config, module.discriminator.parameters())
        opts = [opt_g, opt_d]
    else:
        opts = [_make_optimizer(config, module.parameters())]

    best_sd = copy.deepcopy(module.state_dict())
    best_val = math.inf
    best_epoch: int | None = None
    train_curve: list[float] = []
    val_curve: list[float] = []

    module.train()
    n_train = len(tr)
    for epoch in range(config.epochs):
        factor = schedule_factor(config.schedule, epoch, config.epochs)
        for opt in opts:
            for group in opt.param_groups:
                group["lr"] = config.learning_rate * factor

        perm = np.random.default_rng([_SHUFFLE_STREAM, seed, epoch]).permutation(
            n_train
        )
        loss_sum = 0.0
        for lo in range(0, n_train, config.batch_size):
            idx = torch.from_numpy(perm[lo : lo + config.batch_size].copy())
            xb, yb = x_tr[idx], y_tr[idx]
            if is_adversarial:
                rec, adv, loss_d = cgan_train_step(
                    module, opt_g, opt_d, xb, yb, clip=config.grad_clip
                )
                batch_loss = rec
                if not (math.isfinite(adv) and math.isfinite(loss_d)):
                    batch_loss = math.nan
            else:
                loss = _torch_rel_l2(module(xb), yb)
                batch_loss = float(loss.detach())
                if math.isfinite(batch_loss):
                    opts[0].zero_grad(set_to_none=True)
                    loss.backward()
                    if config.grad_clip is not None:
                        torch.nn.utils.clip_grad_norm_(
                            module.parameters(), config.grad_clip
                        )
                    opts[0].step()
            if not math.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"loss became non-finite in epoch {epoch} (seed {seed})",
                    last_finite_epoch=epoch - 1,
                )
            loss_sum += batch_loss * len(idx)
        train_curve.append(loss_sum / n_train)

        val_metric = _normalized_metric(module, x_va, y_va)
        if not math.isfinite(val_metric):
            raise TrainingDivergedError(
                f"validation metric became non-finite in epoch {epoch} "
                f"(seed {seed})",
                last_finite_epoch=epoch - 1,
            )
        val_curve.append(val_metric)
        if val_metric < best_val:
            best_val = val_metric
            best_epoch = epoch
            best_sd = copy.deepcopy(module.state_dict())

    module.load_state_dict(best_sd)
    module.eval()
    state.trained_on = {
        "dataset": bundle.name,
        "seed": seed,
        "epochs": config.epochs,
        "best_epoch": best_epoch,
    }
    return SeedOutcome(
        seed=seed,
        state=state,
        train_curve=tuple(train_curve),
        val_curve=tuple(val_curve),
        best_epoch=best_epoch,
        wall_time=time.perf_counter() - t_start,
    )


def train(spec: ModelSpec, bundle: DatasetBundle, config: TrainConfig) -> TrainResult:
    """Train one replicate per configured seed.

    A diverging seed is recorded (with its last finite epoch) and the
    remaining seeds still run; only if every seed diverges does the
    error propagate.
    """
    _require_ready(bundle)
    result = TrainResult(spec=spec, config=config)
    failures: list[TrainingDivergedError] = []
    for seed in config.seeds:
        try:
            if config.deterministic:
                with deterministic_mode():
                    outcome = _train_one_seed(spec, bundle, config, seed)
            else:
                outcome = _train_one_seed(spec, bundle, config, seed)
        except TrainingDivergedError as err:
            failures.append(err)
            result.outcomes.append(
                SeedOutcome(
                    seed=seed,
                    state=None,
                    train_curve=(),
                    val_curve=(),
                    best_epoch=None,
                    wall_time=0.0,
                    last_finite_epoch=err.last_finite_epoch,
                )
            )
            continue
        result.outcomes.append(outcome)
    if failures and not result.states:
        raise TrainingDivergedError(
            f"every seed diverged ({len(failures)} of {len(config.seeds)})",
            last_finite_epoch=failures[0].last_finite_epoch,
        )
    return result


@dataclass(frozen=True)
class EvalResult:
    """Dataset score plus the per-sample scores it averages.

    ``per_sample`` is aligned with the split's index array; excluded
    (zero-norm reference) samples hold NaN and are listed in
    ``excluded`` by bundle index.
    """

    mean_rel_l2: float
    per_sample: np.ndarray
    excluded: tuple[int, ...]

    @property
    def n_excluded(self) -> int:
        return len(self.excluded)


def evaluate(state: ModelState, bundle: DatasetBundle, split: str = "test") -> EvalResult:
    """Denormalized-space relative L2 over one split, sample by sample."""
    if bundle.norm is None:
        raise ConfigurationError("bundle has no normalization statistics")
    if split not in bundle.splits:
        raise ConfigurationError(
            f"split '{split}' not present (have {sorted(bundle.splits)})"
        )
    stats = bundle.norm
    idx = bundle.splits[split]
    scores = np.full(len(idx), np.nan)
    excluded: list[int] = []
    for pos, i in enumerate(idx):
        x = normalize_array(
            bundle.inputs[i][None], stats.input_mean, stats.input_std
        )
        pred = predict(state, x, grid=bundle.grid)
        pred = denormalize_array(pred, stats.output_mean, stats.output_std)
        try:
            scores[pos] = relative_l2(pred[0], bundle.outputs[i])
        except DegenerateReferenceError:
            excluded.append(int(i))
    valid = scores[np.isfinite(scores)]
    if valid.size == 0:
        raise DegenerateReferenceError(
            f"every sample in split '{split}' has a zero-norm reference"
        )
    return EvalResult(
        mean_rel_l2=float(valid.mean()),
        per_sample=scores,
        excluded=tuple(excluded),
    )
