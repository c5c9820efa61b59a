"""Native on-disk container: canonical-text manifest plus raw float64 tensors.

A container is a directory holding ``manifest.json`` and one file per tensor.
Tensor files are raw little-endian IEEE-754 double-precision values in
row-major order, so round trips are bit-exact, the layout is language
neutral, and a hex diff of two containers is meaningful.  The manifest is
canonical JSON (sorted keys, no whitespace) recording every tensor's name,
shape, dtype, and SHA-256 checksum alongside free-form metadata; checksums
are verified on load.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .errors import IntegrityError
from .grids import DatasetBundle, GridSpec, NormStats, TimeMeta

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1


def canonical_json(obj) -> str:
    """Serialize to canonical JSON: sorted keys, compact, NaN rejected."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _tensor_filename(name: str) -> str:
    safe = "".join(c if (c.isalnum() or c in "._-") else "_" for c in name)
    return safe + ".f64"


def write_container(path: str | Path, meta: dict, tensors: dict[str, np.ndarray]) -> Path:
    """Write ``tensors`` and ``meta`` as a container directory at ``path``.

    Existing files are overwritten; the manifest is written last so a
    half-written container never carries a valid manifest.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(np.asarray(tensors[name], dtype=np.float64))
        raw = arr.astype("<f8", copy=False).tobytes()
        fname = _tensor_filename(name)
        (path / fname).write_bytes(raw)
        entries.append(
            {
                "name": name,
                "file": fname,
                "shape": list(arr.shape),
                "dtype": "float64",
                "sha256": _sha256(raw),
            }
        )
    manifest = {"format_version": FORMAT_VERSION, "meta": meta, "tensors": entries}
    tmp = path / (MANIFEST_NAME + ".tmp")
    tmp.write_text(canonical_json(manifest) + "\n")
    os.replace(tmp, path / MANIFEST_NAME)
    return path


def read_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Load a container, verifying every tensor against its checksum."""
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.is_file():
        raise IntegrityError(f"no manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise IntegrityError(
            f"unsupported container version {manifest.get('format_version')}"
        )
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest["tensors"]:
        fpath = path / entry["file"]
        if not fpath.is_file():
            raise IntegrityError(f"missing tensor file {fpath}")
        raw = fpath.read_bytes()
        digest = _sha256(raw)
        if digest != entry["sha256"]:
            raise IntegrityError(
                f"checksum mismatch for tensor '{entry['name']}' in {path}: "
                f"manifest {entry['sha256'][:12]}.., file {digest[:12]}.."
            )
        arr = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"])
        tensors[entry["name"]] = arr.astype(np.float64)
    return manifest["meta"], tensors


def container_checksums(path: str | Path) -> dict[str, str]:
    """Tensor-name to checksum map from a container's manifest."""
    manifest = json.loads((Path(path) / MANIFEST_NAME).read_text())
    return {e["name"]: e["sha256"] for e in manifest["tensors"]}


def _grid_to_meta(grid: GridSpec) -> dict:
    return {
        "ndim": grid.ndim,
        "shape": list(grid.shape),
        "extent": list(grid.extent),
        "periodic": grid.periodic,
    }


def _grid_from_meta(meta: dict) -> GridSpec:
    return GridSpec(
        ndim=int(meta["ndim"]),
        shape=tuple(meta["shape"]),
        extent=tuple(meta["extent"]),
        periodic=bool(meta["periodic"]),
    )


def save_bundle(bundle: DatasetBundle, path: str | Path) -> Path:
    """Persist a dataset bundle as a container directory."""
    meta = {
        "kind": "dataset",
        "name": bundle.name,
        "grid": _grid_to_meta(bundle.grid),
        "splits": {k: [int(i) for i in v] for k, v in bundle.splits.items()},
        "pde_meta": bundle.pde_meta,
        "time_meta": (
            dataclasses.asdict(bundle.time_meta) if bundle.time_meta else None
        ),
        "has_norm": bundle.norm is not None,
    }
    tensors = {"inputs": bundle.inputs, "outputs": bundle.outputs}
    if bundle.norm is not None:
        tensors["norm_input_mean"] = bundle.norm.input_mean
        tensors["norm_input_std"] = bundle.norm.input_std
        tensors["norm_output_mean"] = bundle.norm.output_mean
        tensors["norm_output_std"] = bundle.norm.output_std
    return write_container(path, meta, tensors)


def load_bundle(path: str | Path) -> DatasetBundle:
    """Load a dataset bundle written by :func:`save_bundle`."""
    meta, tensors = read_container(path)
    if meta.get("kind") != "dataset":
        raise IntegrityError(f"container at {path} is not a dataset")
    norm = None
    if meta.get("has_norm"):
        norm = NormStats(
            input_mean=tensors["norm_input_mean"],
            input_std=tensors["norm_input_std"],
            output_mean=tensors["norm_output_mean"],
            output_std=tensors["norm_output_std"],
        )
    time_meta = None
    if meta.get("time_meta"):
        time_meta = TimeMeta(**meta["time_meta"])
    return DatasetBundle(
        name=meta["name"],
        inputs=tensors["inputs"],
        outputs=tensors["outputs"],
        grid=_grid_from_meta(meta["grid"]),
        splits={k: np.asarray(v, dtype=np.int64) for k, v in meta["splits"].items()},
        norm=norm,
        pde_meta=meta.get("pde_meta", {}),
        time_meta=time_meta,
    )
