"""Uniform contract over the model zoo.

Every family is configured through a ModelSpec, constructed by
build_model deterministically from an integer seed, and applied through
predict.  Arrays at the boundary are numpy float64 channels-last
(sample, *spatial, channel); parameters live in torch modules.

Grid-based families receive normalized coordinates appended to the
input channels; the two coefficient-space families (sno, pod-deeponet)
see only the function values.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import torch

from ..container import read_container, write_container
from ..errors import ConfigurationError, ShapeError
from ..grids import GridSpec

FAMILIES = (
    "fnn",
    "resnet",
    "unet",
    "cgan",
    "deeponet",
    "pod-deeponet",
    "fno",
    "wno",
    "sno",
    "oformer",
    "gnot",
)

# Families whose parameter count may not depend on the grid resolution.
MESH_INVARIANT_FAMILIES = ("fno", "sno", "deeponet", "oformer", "gnot")

# Families that see only function values, never coordinate channels.
COORD_FREE_FAMILIES = ("sno", "pod-deeponet")

_FAMILY_OPTIONS: dict[str, dict[str, Any]] = {
    "fnn": {},
    "resnet": {},
    "unet": {"auto_pad": True},
    "cgan": {"auto_pad": True, "lambda_adv": 0.01},
    "deeponet": {"p": 64, "sensors": 16},
    "pod-deeponet": {"p": 64, "sensors": 16, "energy": 0.99},
    "fno": {"k_max": 12},
    "wno": {"levels": 2, "keep_detail": False},
    "sno": {"k_max": 12},
    "oformer": {"heads": 4, "rollout": 1, "rff_features": 16},
    "gnot": {"heads": 4, "experts": 3},
}


def _check_option(key: str, value: Any) -> None:
    if key in ("auto_pad", "keep_detail"):
        if not isinstance(value, bool):
            raise ConfigurationError(f"option '{key}' must be a bool, got {value!r}")
    elif key == "lambda_adv":
        if not (float(value) >= 0.0):
            raise ConfigurationError(f"lambda_adv must be >= 0, got {value!r}")
    elif key == "energy":
        if not (0.0 < float(value) <= 1.0):
            raise ConfigurationError(f"energy must be in (0, 1], got {value!r}")
    elif key == "sensors":
        if int(value) < 2:
            raise ConfigurationError(f"sensors must be >= 2, got {value!r}")
    else:
        if int(value) < 1:
            raise ConfigurationError(f"option '{key}' must be >= 1, got {value!r}")


@dataclass(frozen=True)
class ModelSpec:
    """Family name plus sizes; family-specific keys live in ``options``."""

    family: str
    width: int = 32
    depth: int = 4
    options: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(
                f"unknown family '{self.family}'; choose from {FAMILIES}"
            )
        if self.width < 1 or self.depth < 0:
            raise ConfigurationError(
                f"width must be >= 1 and depth >= 0, got {self.width}/{self.depth}"
            )
        allowed = _FAMILY_OPTIONS[self.family]
        seen = set()
        for key, value in self.options:
            if key not in allowed:
                raise ConfigurationError(
                    f"family '{self.family}' does not accept option '{key}' "
                    f"(allowed: {sorted(allowed) or 'none'})"
                )
            if key in seen:
                raise ConfigurationError(f"duplicate option '{key}'")
            seen.add(key)
            _check_option(key, value)
        if self.family in ("oformer", "gnot"):
            heads = self.option("heads")
            if self.width % heads != 0:
                raise ConfigurationError(
                    f"width {self.width} not divisible by heads {heads}"
                )

    @classmethod
    def make(cls, family: str, width: int = 32, depth: int = 4, **options) -> "ModelSpec":
        return cls(family, width, depth, tuple(sorted(options.items())))

    def option(self, key: str):
        for k, v in self.options:
            if k == key:
                return v
        return _FAMILY_OPTIONS[self.family][key]

    def canonical(self) -> dict:
        return {
            "family": self.family,
            "width": self.width,
            "depth": self.depth,
            "options": {k: v for k, v in sorted(self.options)},
        }


@dataclass
class ModelState:
    """An initialized (possibly trained) model plus its provenance."""

    spec: ModelSpec
    module: torch.nn.Module
    seed: int
    in_channels: int
    out_channels: int
    grid: GridSpec
    trained_on: dict | None = None
    time_dependent: bool = False


def uses_coordinates(family: str) -> bool:
    return family not in COORD_FREE_FAMILIES


# First-seen parameter counts for mesh-invariant families, keyed by
# everything a count may legally depend on.  A later build at another
# resolution that disagrees is a bug, caught at construction.
_COUNT_CACHE: dict[tuple, int] = {}


def build_model(
    spec: ModelSpec,
    in_channels: int,
    out_channels: int,
    grid: GridSpec,
    seed: int = 0,
    train_outputs: np.ndarray | None = None,
    time_dependent: bool = False,
    _aux: dict | None = None,
) -> ModelState:
    """Construct an initialized model; bit-identical for equal seeds."""
    if in_channels < 1 or out_channels < 1:
        raise ConfigurationError("in_channels and out_channels must be >= 1")
    if spec.family == "oformer" and spec.option("rollout") > 1 and not time_dependent:
        raise ConfigurationError(
            "latent rollout > 1 requires a time-dependent dataset"
        )
    if spec.family == "pod-deeponet" and train_outputs is None and _aux is None:
        raise ConfigurationError(
            "pod-deeponet needs training outputs to compute its basis"
        )

    from . import cgan, conv, deeponet, fnn, fno, gnot, oformer, sno, wno

    builders = {
        "fnn": fnn.build,
        "resnet": conv.build_resnet,
        "unet": conv.build_unet,
        "cgan": cgan.build,
        "deeponet": deeponet.build,
        "pod-deeponet": deeponet.build_pod,
        "fno": fno.build,
        "wno": wno.build,
        "sno": sno.build,
        "oformer": oformer.build,
        "gnot": gnot.build,
    }
    c_total = in_channels + (grid.ndim if uses_coordinates(spec.family) else 0)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        module = builders[spec.family](
            spec, c_total, out_channels, grid, train_outputs=train_outputs, aux=_aux
        )
    module.eval()
    state = ModelState(
        spec=spec,
        module=module,
        seed=seed,
        in_channels=in_channels,
        out_channels=out_channels,
        grid=grid,
        time_dependent=time_dependent,
    )
    if spec.family in MESH_INVARIANT_FAMILIES:
        key = (
            tuple(sorted(spec.canonical()["options"].items())),
            spec.family,
            spec.width,
            spec.depth,
            grid.ndim,
            in_channels,
            out_channels,
        )
        count = count_params(state)
        cached = _COUNT_CACHE.setdefault(key, count)
        if cached != count:
            raise RuntimeError(
                f"{spec.family} parameter count changed with resolution: "
                f"{cached} vs {count}"
            )
    return state


def count_params(state: ModelState) -> int:
    return sum(p.numel() for p in state.module.parameters() if p.requires_grad)


def param_hash(state: ModelState) -> str:
    """Digest of every parameter and buffer, order-stable."""
    h = hashlib.sha256()
    for name, tensor in sorted(state.module.state_dict().items()):
        h.update(name.encode())
        h.update(tensor.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def _assemble_input(state: ModelState, inputs: np.ndarray, grid: GridSpec) -> torch.Tensor:
    inputs = np.asarray(inputs, dtype=np.float64)
    expected = grid.shape + (state.in_channels,)
    if inputs.ndim != grid.ndim + 2 or inputs.shape[1:] != tuple(expected):
        raise ShapeError(
            f"expected inputs (n, {', '.join(map(str, expected))}), "
            f"got {inputs.shape}"
        )
    if uses_coordinates(state.spec.family):
        coords = grid.coordinate_channels()
        coords = np.broadcast_to(coords, (inputs.shape[0],) + coords.shape)
        inputs = np.concatenate([inputs, coords], axis=-1)
    return torch.from_numpy(np.ascontiguousarray(inputs))


def predict(state: ModelState, inputs: np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    """Apply the model; returns float64 (n, *spatial, out_channels)."""
    grid = grid if grid is not None else state.grid
    x = _assemble_input(state, inputs, grid)
    dtype = next(state.module.parameters()).dtype
    with torch.no_grad():
        y = state.module(x.to(dtype))
    return y.detach().cpu().double().numpy()


def save_checkpoint(state: ModelState, path: str | Path) -> Path:
    """Serialize parameters and provenance; float32 survives exactly
    because every float32 is representable in the container's float64."""
    dtype = str(next(state.module.parameters()).dtype).replace("torch.", "")
    meta = {
        "kind": "model-checkpoint",
        "spec": state.spec.canonical(),
        "seed": state.seed,
        "in_channels": state.in_channels,
        "out_channels": state.out_channels,
        "grid": {
            "ndim": state.grid.ndim,
            "shape": list(state.grid.shape),
            "extent": list(state.grid.extent),
            "periodic": state.grid.periodic,
        },
        "trained_on": state.trained_on,
        "time_dependent": state.time_dependent,
        "dtype": dtype,
    }
    tensors = {
        "param." + name: tensor.detach().cpu().double().numpy()
        for name, tensor in state.module.state_dict().items()
    }
    return write_container(path, meta, tensors)


def load_checkpoint(path: str | Path) -> ModelState:
    meta, tensors = read_container(path)
    if meta.get("kind") != "model-checkpoint":
        raise ConfigurationError(f"{path} is not a model checkpoint")
    s = meta["spec"]
    spec = ModelSpec.make(s["family"], s["width"], s["depth"], **s["options"])
    g = meta["grid"]
    grid = GridSpec(
        ndim=int(g["ndim"]),
        shape=tuple(g["shape"]),
        extent=tuple(g["extent"]),
        periodic=bool(g["periodic"]),
    )
    aux = None
    if spec.family == "pod-deeponet":
        aux = {"mean": tensors["param.mean"], "basis": tensors["param.basis"]}
    state = build_model(
        spec,
        int(meta["in_channels"]),
        int(meta["out_channels"]),
        grid,
        seed=int(meta["seed"]),
        time_dependent=bool(meta.get("time_dependent", False)),
        _aux=aux,
    )
    dtype = getattr(torch, meta["dtype"])
    loaded = {
        name[len("param.") :]: torch.from_numpy(arr).to(dtype)
        for name, arr in tensors.items()
    }
    state.module.load_state_dict(loaded, strict=True)
    state.trained_on = meta.get("trained_on")
    return state
