"""Branch-trunk operator networks, plus the POD-basis variant.

The branch encodes the input function sampled on a fixed sensor lattice
(side length declared in the spec, so parameter counts never depend on
the data resolution); the trunk evaluates basis functions at query
coordinates, read off the appended coordinate channels.  The POD
variant freezes the trunk to the leading left singular vectors of the
mean-centered training outputs and learns only the branch.
"""
from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from ..errors import ConfigurationError, ShapeError
from .layers import MLP, resample_to


class DeepONet(nn.Module):
    def __init__(self, c_in, c_out, width, depth, p, sensors, ndim):
        super().__init__()
        self.ndim = ndim
        self.p = p
        self.c_out = c_out
        self.sensor_shape = (sensors,) * ndim
        n_sens = sensors**ndim
        self.branch = MLP(n_sens * c_in, p * c_out, width, depth)
        self.trunk = MLP(ndim, p, width, depth)
        self.bias = nn.Parameter(torch.zeros(c_out))

    def forward(self, x):
        coords = x[..., -self.ndim :]
        sens = resample_to(x, self.sensor_shape, self.ndim)
        b = self.branch(sens.reshape(sens.shape[0], -1))
        b = b.reshape(-1, self.p, self.c_out)
        t = self.trunk(coords)
        return torch.einsum("n...p,npc->n...c", t, b) + self.bias


def compute_pod_basis(outputs: np.ndarray, p: int):
    """Leading left singular vectors of the mean-centered output matrix.

    outputs: (n_samples, *spatial, channels).  Returns (mean, modes)
    with mean (n_features,) and modes (n_features, p) orthonormal.
    """
    flat = np.asarray(outputs, dtype=np.float64).reshape(outputs.shape[0], -1)
    n_samples, n_features = flat.shape
    if not 1 <= p <= min(n_samples, n_features):
        raise ConfigurationError(
            f"p = {p} outside [1, min(samples, features) = "
            f"{min(n_samples, n_features)}]"
        )
    mean = flat.mean(axis=0)
    u, s, _ = np.linalg.svd((flat - mean).T, full_matrices=False)
    return mean, u[:, :p], s


def pick_mode_count(singular_values: np.ndarray, p_cap: int, energy: float) -> int:
    """Smaller of the cap and the count capturing the energy fraction."""
    sq = np.asarray(singular_values, dtype=np.float64) ** 2
    total = sq.sum()
    if total == 0.0:
        return 1
    frac = np.cumsum(sq) / total
    p_energy = int(np.searchsorted(frac, energy) + 1)
    return max(1, min(p_cap, p_energy, sq.size))


class PODDeepONet(nn.Module):
    """Frozen POD trunk; branch predicts basis coefficients."""

    def __init__(self, c_in, c_out, width, depth, sensors, ndim, mean, basis):
        super().__init__()
        self.ndim = ndim
        self.c_out = c_out
        self.sensor_shape = (sensors,) * ndim
        p = basis.shape[1]
        self.register_buffer("mean", torch.as_tensor(mean, dtype=torch.float32))
        self.register_buffer("basis", torch.as_tensor(basis, dtype=torch.float32))
        self.branch = MLP(sensors**ndim * c_in, p, width, depth)

    def forward(self, x):
        n_features = self.mean.shape[0]
        n_points = int(np.prod(x.shape[1 : 1 + self.ndim]))
        if n_points * self.c_out != n_features:
            raise ShapeError(
                f"basis built for {n_features} output values, grid provides "
                f"{n_points} points x {self.c_out} channels"
            )
        sens = resample_to(x, self.sensor_shape, self.ndim)
        b = self.branch(sens.reshape(sens.shape[0], -1))
        flat = self.mean + b @ self.basis.T
        return flat.reshape(x.shape[0], *x.shape[1 : 1 + self.ndim], self.c_out)


def build(spec, c_in, c_out, grid, train_outputs=None, aux=None):
    return DeepONet(
        c_in,
        c_out,
        spec.width,
        spec.depth,
        spec.option("p"),
        spec.option("sensors"),
        grid.ndim,
    )


def build_pod(spec, c_in, c_out, grid, train_outputs=None, aux=None):
    if aux is not None:
        mean, basis = aux["mean"], aux["basis"]
    else:
        outs = np.asarray(train_outputs, dtype=np.float64)
        cap = min(spec.option("p"), outs.shape[0], outs[0].size)
        mean, basis, s = compute_pod_basis(outs, cap)
        p = pick_mode_count(s, cap, spec.option("energy"))
        basis = basis[:, :p]
    return PODDeepONet(
        c_in,
        c_out,
        spec.width,
        spec.depth,
        spec.option("sensors"),
        grid.ndim,
        mean,
        basis,
    )
