"""Uniform-grid data model, normalization, and the relative-L2 metric.

All benchmark data lives on uniform rectangular grids over a box domain
(the unit interval or unit square by default).  Two sampling conventions
exist:

- non-periodic grids include both endpoints: point ``j`` of axis ``i`` sits
  at ``j * extent[i] / (shape[i] - 1)``;
- periodic grids drop the right endpoint (it duplicates the left one):
  point ``j`` sits at ``j * extent[i] / shape[i]``.

A discretized input/output function pair is a :class:`FieldSample`; a named
collection of samples with split indices and normalization statistics is a
:class:`DatasetBundle`.  The single accuracy metric of the whole suite is
:func:`relative_l2`, the per-sample relative Euclidean norm of the residual;
dataset scores are means of per-sample scores, which keeps values comparable
across grid resolutions.  Metric evaluation always happens on physical
(denormalized) values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlignmentError,
    ConfigurationError,
    DegenerateReferenceError,
    ShapeError,
)

# Standard deviations below this floor are clamped so constant channels
# normalize to zero instead of dividing by zero.
EPS_STD = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular sampling grid.

    Parameters
    ----------
    ndim:
        Spatial dimensionality, 1 or 2.
    shape:
        Number of sample points per axis; every entry must be >= 2.
    extent:
        Physical length per axis (dimensionless units); defaults to the
        unit interval / unit square.
    periodic:
        If True the grid samples a periodic domain and excludes the right
        endpoint on every axis.
    """

    ndim: int
    shape: tuple[int, ...]
    extent: tuple[float, ...] = None  # type: ignore[assignment]
    periodic: bool = False

    def __post_init__(self):
        if self.ndim not in (1, 2):
            raise ConfigurationError(f"ndim must be 1 or 2, got {self.ndim}")
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        if len(shape) != self.ndim:
            raise ConfigurationError(
                f"shape {shape} does not match ndim {self.ndim}"
            )
        if any(n < 2 for n in shape):
            raise ConfigurationError(f"all shape entries must be >= 2, got {shape}")
        extent = self.extent
        if extent is None:
            extent = (1.0,) * self.ndim
        extent = tuple(float(e) for e in extent)
        object.__setattr__(self, "extent", extent)
        if len(extent) != self.ndim:
            raise ConfigurationError(
                f"extent {extent} does not match ndim {self.ndim}"
            )
        if any(e <= 0 for e in extent):
            raise ConfigurationError(f"extent entries must be > 0, got {extent}")

    @property
    def npoints(self) -> int:
        """Total number of grid points (the discretization size)."""
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        """Distance between neighboring points per axis."""
        if self.periodic:
            return tuple(e / n for e, n in zip(self.extent, self.shape))
        return tuple(e / (n - 1) for e, n in zip(self.extent, self.shape))

    def axis_coords(self, axis: int) -> np.ndarray:
        """Coordinates of the sample points along one axis, sorted ascending."""
        n = self.shape[axis]
        e = self.extent[axis]
        if self.periodic:
            return np.arange(n, dtype=np.float64) * (e / n)
        return np.linspace(0.0, e, n, dtype=np.float64)

    def coordinate_channels(self) -> np.ndarray:
        """Meshgrid of normalized coordinates, shape ``(*shape, ndim)``.

        Coordinates are divided by the extent so they live in [0, 1)
        regardless of the physical box size.
        """
        axes = [self.axis_coords(i) / self.extent[i] for i in range(self.ndim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)


def make_grid(spec: GridSpec) -> tuple[np.ndarray, ...]:
    """Return the coordinate array of every axis of ``spec``.

    For the default unit extent on a non-periodic axis with ``n`` points,
    point ``j`` sits at ``j / (n - 1)``, both endpoints included.
    """
    return tuple(spec.axis_coords(i) for i in range(spec.ndim))


@dataclass(frozen=True)
class TimeMeta:
    """Time window of a time-dependent sample: start, end, stored snapshots."""

    t0: float
    t_final: float
    n_stored_steps: int


@dataclass(frozen=True)
class FieldSample:
    """One discretized input/output function pair on a shared grid.

    ``input`` has shape ``(*grid.shape, in_channels)`` and ``output``
    ``(*grid.shape, out_channels)``.  All values must be finite.
    """

    input: np.ndarray
    output: np.ndarray
    grid: GridSpec
    time_meta: TimeMeta | None = None

    def __post_init__(self):
        for name, arr in (("input", self.input), ("output", self.output)):
            if arr.ndim != self.grid.ndim + 1:
                raise ShapeError(
                    f"{name} must have shape (*grid.shape, channels); "
                    f"got ndim {arr.ndim} for grid ndim {self.grid.ndim}"
                )
            if tuple(arr.shape[:-1]) != self.grid.shape:
                raise ShapeError(
                    f"{name} spatial shape {arr.shape[:-1]} does not match "
                    f"grid shape {self.grid.shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"{name} contains non-finite values")

    @property
    def in_channels(self) -> int:
        return self.input.shape[-1]

    @property
    def out_channels(self) -> int:
        return self.output.shape[-1]


@dataclass(frozen=True)
class NormStats:
    """Per-channel standardization statistics, computed on the training split.

    Stored standard deviations are clamped from below by ``EPS_STD`` so that
    constant channels map to zero.  ``normalize`` / ``denormalize`` round-trip
    to 1e-12 in double precision.
    """

    input_mean: np.ndarray
    input_std: np.ndarray
    output_mean: np.ndarray
    output_std: np.ndarray

    def __post_init__(self):
        for name in ("input_mean", "input_std", "output_mean", "output_std"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 1:
                raise ShapeError(f"{name} must be one value per channel")
            object.__setattr__(self, name, arr)
        for name in ("input_std", "output_std"):
            arr = getattr(self, name)
            if np.any(arr < EPS_STD):
                raise ShapeError(
                    f"{name} below the {EPS_STD} floor; clamp before constructing"
                )


def compute_norm_stats(
    inputs: np.ndarray, outputs: np.ndarray, train_indices: np.ndarray
) -> NormStats:
    """Standardization statistics from the training samples only.

    ``inputs`` and ``outputs`` are stacked sample arrays of shape
    ``(n_samples, *spatial, channels)``.
    """
    train_indices = np.asarray(train_indices, dtype=np.int64)
    x = inputs[train_indices].astype(np.float64)
    y = outputs[train_indices].astype(np.float64)
    reduce_axes_x = tuple(range(x.ndim - 1))
    reduce_axes_y = tuple(range(y.ndim - 1))
    return NormStats(
        input_mean=x.mean(axis=reduce_axes_x),
        input_std=np.maximum(x.std(axis=reduce_axes_x), EPS_STD),
        output_mean=y.mean(axis=reduce_axes_y),
        output_std=np.maximum(y.std(axis=reduce_axes_y), EPS_STD),
    )


def normalize_array(x: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Map each channel to ``(x - mean) / std`` (std already clamped)."""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    if x.shape[-1] != mean.shape[0] or x.shape[-1] != std.shape[0]:
        raise ShapeError(
            f"channel count {x.shape[-1]} does not match stats "
            f"({mean.shape[0]} means, {std.shape[0]} stds)"
        )
    return (x - mean) / std


def denormalize_array(x: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Inverse of :func:`normalize_array`: ``x * std + mean``."""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    if x.shape[-1] != mean.shape[0] or x.shape[-1] != std.shape[0]:
        raise ShapeError(
            f"channel count {x.shape[-1]} does not match stats "
            f"({mean.shape[0]} means, {std.shape[0]} stds)"
        )
    return x * std + mean


@dataclass
class DatasetBundle:
    """A named collection of samples plus splits, stats, and PDE metadata.

    ``inputs`` and ``outputs`` are stacked arrays of shape
    ``(n_samples, *grid.shape, channels)``.  ``splits`` maps split names
    (train/val/test) to index arrays; the sets must be pairwise disjoint
    and in range.  Indices outside every split are allowed (subset
    experiments carve them out deliberately).
    """

    name: str
    inputs: np.ndarray
    outputs: np.ndarray
    grid: GridSpec
    splits: dict[str, np.ndarray] = field(default_factory=dict)
    norm: NormStats | None = None
    pde_meta: dict = field(default_factory=dict)
    time_meta: TimeMeta | None = None

    def __post_init__(self):
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ShapeError(
                f"inputs ({self.inputs.shape[0]}) and outputs "
                f"({self.outputs.shape[0]}) disagree on sample count"
            )
        for name, arr in (("inputs", self.inputs), ("outputs", self.outputs)):
            if tuple(arr.shape[1:-1]) != self.grid.shape:
                raise ShapeError(
                    f"{name} spatial shape {arr.shape[1:-1]} does not match "
                    f"grid shape {self.grid.shape}"
                )
        self.splits = {k: np.asarray(v, dtype=np.int64) for k, v in self.splits.items()}
        self.validate_splits()

    def validate_splits(self) -> None:
        n = self.n_samples
        seen: set[int] = set()
        for split_name, idx in self.splits.items():
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ConfigurationError(
                    f"split '{split_name}' has indices outside [0, {n})"
                )
            as_set = set(int(i) for i in idx)
            if len(as_set) != idx.size:
                raise ConfigurationError(f"split '{split_name}' has repeated indices")
            if seen & as_set:
                raise ConfigurationError(
                    f"split '{split_name}' overlaps another split"
                )
            seen |= as_set

    @property
    def n_samples(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def in_channels(self) -> int:
        return int(self.inputs.shape[-1])

    @property
    def out_channels(self) -> int:
        return int(self.outputs.shape[-1])

    def sample(self, i: int) -> FieldSample:
        return FieldSample(
            input=self.inputs[i], output=self.outputs[i], grid=self.grid,
            time_meta=self.time_meta,
        )

    def with_norm_from_train(self) -> "DatasetBundle":
        """Attach statistics computed on this bundle's training split."""
        if "train" not in self.splits:
            raise ConfigurationError("bundle has no train split to compute stats on")
        stats = compute_norm_stats(self.inputs, self.outputs, self.splits["train"])
        return dataclasses.replace(self, norm=stats)


def normalize_bundle(bundle: DatasetBundle) -> DatasetBundle:
    """Return a copy of ``bundle`` with standardized input/output channels.

    Statistics must already be attached (from the training split of the same
    bundle); each channel is mapped to ``(x - mean) / std``.  Scores are never
    computed on these values: evaluation denormalizes first.
    """
    if bundle.norm is None:
        raise ConfigurationError(
            "bundle has no normalization statistics; call with_norm_from_train first"
        )
    stats = bundle.norm
    return dataclasses.replace(
        bundle,
        inputs=normalize_array(bundle.inputs, stats.input_mean, stats.input_std),
        outputs=normalize_array(bundle.outputs, stats.output_mean, stats.output_std),
    )


def relative_l2(pred: np.ndarray, truth: np.ndarray) -> float:
    """Relative Euclidean error of one sample over all points and channels.

    Returns ``||pred - truth|| / ||truth||``.  A zero-norm reference raises
    :class:`DegenerateReferenceError`; silently returning 0 or infinity would
    poison dataset means.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    denom = float(np.linalg.norm(truth.ravel()))
    if denom == 0.0:
        raise DegenerateReferenceError("reference has zero norm")
    num = float(np.linalg.norm((pred - truth).ravel()))
    return num / denom


def relative_l2_batch(preds: np.ndarray, truths: np.ndarray) -> np.ndarray:
    """Per-sample relative L2 scores for stacked arrays ``(n, *spatial, c)``.

    The dataset score is the mean of this vector; computing per-sample scores
    first makes the mean independent of batch grouping.
    """
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape:
        raise ShapeError(
            f"shape mismatch: preds {preds.shape} vs truths {truths.shape}"
        )
    n = preds.shape[0]
    flat_p = preds.reshape(n, -1)
    flat_t = truths.reshape(n, -1)
    denom = np.linalg.norm(flat_t, axis=1)
    if np.any(denom == 0.0):
        bad = int(np.nonzero(denom == 0.0)[0][0])
        raise DegenerateReferenceError(f"sample {bad} has zero-norm reference")
    return np.linalg.norm(flat_p - flat_t, axis=1) / denom


def subsample_array(arr: np.ndarray, stride: int, periodic: bool) -> np.ndarray:
    """Decimate the spatial axes of ``(*spatial, channels)`` by ``stride``.

    Non-periodic axes keep both endpoints, so ``(n - 1)`` must be divisible
    by the stride; periodic axes wrap, so ``n`` itself must divide.
    """
    if stride < 1:
        raise ConfigurationError(f"stride must be >= 1, got {stride}")
    ndim_spatial = arr.ndim - 1
    for ax in range(ndim_spatial):
        n = arr.shape[ax]
        if periodic:
            if n % stride != 0:
                raise AlignmentError(
                    f"periodic axis of {n} points not divisible by stride {stride}"
                )
        else:
            if (n - 1) % stride != 0:
                raise AlignmentError(
                    f"axis of {n} points: ({n} - 1) not divisible by stride {stride}"
                )
    slicer = tuple(slice(None, None, stride) for _ in range(ndim_spatial))
    return arr[slicer + (slice(None),)]


def subsample(sample: FieldSample, stride: int) -> FieldSample:
    """Restrict a sample to every ``stride``-th point of each axis.

    Endpoints are preserved on non-periodic grids: the new shape per axis is
    ``(old - 1) / stride + 1``.  Stride 1 is the identity.
    """
    if stride == 1:
        return sample
    grid = sample.grid
    new_input = subsample_array(sample.input, stride, grid.periodic)
    new_output = subsample_array(sample.output, stride, grid.periodic)
    new_shape = tuple(new_input.shape[: grid.ndim])
    new_grid = GridSpec(
        ndim=grid.ndim, shape=new_shape, extent=grid.extent, periodic=grid.periodic
    )
    return FieldSample(
        input=new_input, output=new_output, grid=new_grid, time_meta=sample.time_meta
    )
