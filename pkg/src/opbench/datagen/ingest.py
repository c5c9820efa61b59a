"""Adapters for externally published dataset layouts.

Two layouts are supported; both convert into the native container bundle
once, after which the suite only touches native bundles.

Hierarchical-array layout (``pdebench-style``), one HDF5 file:

- ``tensor``: float array ``(N, nt, nx)`` or ``(N, nt, nx, ny)`` holding the
  stored solution snapshots per sample.
- ``nu`` (optional): float array ``(N, nx[, ny])``; when present it is the
  input function (e.g. a permeability field) and the output is the last
  snapshot ``tensor[:, -1]``.  Without it the input is the first snapshot
  and the output the last.
- ``t-coordinate`` (optional): snapshot times; defaults to [0, 1].

Delimited-text layout (``mechanical-mnist-style``), one directory:

- ``input.txt``: N rows of m*m values, the per-element microstructure
  bitmap in row-major order.
- ``output.txt``: N rows of 2*m*m values, the element-wise displacements:
  all u_x values in row-major order, then all u_y values.
"""

from __future__ import annotations

from pathlib import Path

import h5py
import numpy as np

from ..errors import IngestionError
from ..grids import DatasetBundle, GridSpec, TimeMeta

ADAPTERS = ("pdebench-style", "mechanical-mnist-style")


def ingest_external(path: str | Path, adapter: str, name: str | None = None) -> DatasetBundle:
    """Read an external file/directory into a validated dataset bundle."""
    if adapter == "pdebench-style":
        return _ingest_hdf5(Path(path), name)
    if adapter == "mechanical-mnist-style":
        return _ingest_text(Path(path), name)
    raise IngestionError(f"unknown adapter '{adapter}'; supported: {ADAPTERS}")


def _check_finite(arr: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(arr.reshape(arr.shape[0], -1)).all(axis=1)
    if bad.any():
        idx = int(np.nonzero(bad)[0][0])
        raise IngestionError(f"{what} sample {idx} contains non-finite values")


def _ingest_hdf5(path: Path, name: str | None) -> DatasetBundle:
    if not path.is_file():
        raise IngestionError(f"no such file: {path}")
    with h5py.File(path, "r") as f:
        if "tensor" not in f:
            raise IngestionError(f"{path} has no 'tensor' dataset")
        tensor = np.asarray(f["tensor"], dtype=np.float64)
        coeff = None
        if "nu" in f:
            coeff = np.asarray(f["nu"], dtype=np.float64)
        t_coord = None
        if "t-coordinate" in f:
            t_coord = np.asarray(f["t-coordinate"], dtype=np.float64)

    if tensor.ndim not in (3, 4):
        raise IngestionError(
            f"'tensor' must be (N, nt, nx) or (N, nt, nx, ny); got {tensor.shape}"
        )
    n_samples, nt = tensor.shape[0], tensor.shape[1]
    spatial = tensor.shape[2:]
    ndim = len(spatial)

    if coeff is not None:
        if coeff.shape != (n_samples,) + spatial:
            raise IngestionError(
                f"'nu' shape {coeff.shape} does not match tensor spatial "
                f"shape {(n_samples,) + spatial}"
            )
        inputs = coeff[..., None]
        periodic = False
    else:
        inputs = tensor[:, 0][..., None]
        periodic = True
    outputs = tensor[:, -1][..., None]

    _check_finite(inputs, "input")
    _check_finite(outputs, "output")

    grid = GridSpec(ndim=ndim, shape=spatial, periodic=periodic)
    time_meta = None
    if nt > 1:
        if t_coord is not None and t_coord.size >= 2:
            time_meta = TimeMeta(float(t_coord[0]), float(t_coord[-1]), int(nt))
        else:
            time_meta = TimeMeta(0.0, 1.0, int(nt))
    return DatasetBundle(
        name=name or path.stem,
        inputs=inputs,
        outputs=outputs,
        grid=grid,
        pde_meta={"source": "pdebench-style", "file": path.name},
        time_meta=time_meta,
    )


def _load_rows(path: Path, what: str) -> np.ndarray:
    try:
        arr = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise IngestionError(f"malformed {what} file {path}: {exc}") from exc
    return arr


def _ingest_text(path: Path, name: str | None) -> DatasetBundle:
    if not path.is_dir():
        raise IngestionError(f"expected a directory with input.txt/output.txt: {path}")
    in_path = path / "input.txt"
    out_path = path / "output.txt"
    for p in (in_path, out_path):
        if not p.is_file():
            raise IngestionError(f"missing {p.name} in {path}")
    raw_in = _load_rows(in_path, "input")
    raw_out = _load_rows(out_path, "output")
    if raw_in.shape[0] != raw_out.shape[0]:
        raise IngestionError(
            f"input has {raw_in.shape[0]} rows but output has {raw_out.shape[0]}"
        )
    n_samples, n_in = raw_in.shape
    m = int(round(np.sqrt(n_in)))
    if m * m != n_in:
        raise IngestionError(f"input row length {n_in} is not a perfect square")
    if raw_out.shape[1] != 2 * m * m:
        raise IngestionError(
            f"output row length {raw_out.shape[1]} != 2 * {m}^2 "
            "(element-wise u_x then u_y)"
        )
    _check_finite(raw_in, "input")
    _check_finite(raw_out, "output")

    inputs = raw_in.reshape(n_samples, m, m, 1)
    ux = raw_out[:, : m * m].reshape(n_samples, m, m)
    uy = raw_out[:, m * m :].reshape(n_samples, m, m)
    outputs = np.stack([ux, uy], axis=-1)
    grid = GridSpec(ndim=2, shape=(m, m))
    return DatasetBundle(
        name=name or path.name,
        inputs=inputs,
        outputs=outputs,
        grid=grid,
        pde_meta={"source": "mechanical-mnist-style", "directory": path.name},
    )
