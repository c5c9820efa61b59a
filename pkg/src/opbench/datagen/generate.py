"""Benchmark dataset generation: random inputs through classical solvers.

Six datasets can be generated locally; the two large-deformation datasets
(shear, biaxial) are ingest-only since their source simulations are
nonlinear FEM runs outside this suite's scope.  Generation is deterministic:
sample ``i`` of master seed ``s`` always uses the derived seed ``(s, i)``,
so distinct samples can be produced independently and in any order.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from ..grids import DatasetBundle, GridSpec, TimeMeta
from .burgers import solve_burgers_1d
from .common import SolverConfig, default_config
from .darcy import solve_darcy_steady
from .elasticity import sample_microstructure, solve_plane_stress_composite
from .grf import GRFSpec, sample_grf
from .navier_stokes import default_forcing, solve_ns_vorticity
from .shallow_water import solve_shallow_water

GENERATED_DATASETS = (
    "burgers",
    "darcy",
    "navier-stokes",
    "shallow-water",
    "stress",
    "strain",
)

# Input-sampler defaults per dataset.  Scales are chosen so fields are O(1):
# smooth enough at desk-scale resolutions for the solvers' accuracy checks,
# rough enough that the learning task is not trivial.
_GRF_DEFAULTS = {
    "burgers": dict(alpha=2.5, tau=5.0, ndim=1, k_max=16, scale=25.0),
    "darcy": dict(alpha=2.0, tau=3.0, ndim=2, k_max=16, scale=1.0),
    "navier-stokes": dict(alpha=2.5, tau=7.0, ndim=2, k_max=16, scale=7.0**1.5),
}

DARCY_LOW = 3.0
DARCY_HIGH = 12.0


def _grf_spec(dataset: str, cfg: SolverConfig, seed) -> GRFSpec:
    params = dict(_GRF_DEFAULTS[dataset])
    params.update(cfg.grf)
    return GRFSpec(seed=seed, **params)


def _sample_seed(master_seed: int, index: int) -> tuple[int, int]:
    return (int(master_seed), int(index))


def generate_dataset(
    name: str, count: int, cfg: SolverConfig | None = None, seed: int = 0
) -> DatasetBundle:
    """Generate ``count`` samples of dataset ``name`` deterministically.

    The stress and strain datasets are built from identical microstructure
    inputs whenever the same seed is used: the per-sample seed derivation
    does not involve the dataset name, and both read off one elasticity
    solve.  That makes the train-on-one-test-on-the-other protocol
    well-posed.
    """
    if name not in GENERATED_DATASETS:
        raise ConfigurationError(
            f"cannot generate '{name}'; supported: {GENERATED_DATASETS}"
        )
    if count < 1:
        raise ConfigurationError(f"count must be >= 1, got {count}")
    if cfg is None:
        cfg = default_config(name)

    builder = {
        "burgers": _generate_burgers,
        "darcy": _generate_darcy,
        "navier-stokes": _generate_navier_stokes,
        "shallow-water": _generate_shallow_water,
        "stress": _generate_elastic,
        "strain": _generate_elastic,
    }[name]
    return builder(name, count, cfg, seed)


def _generate_burgers(name, count, cfg, seed) -> DatasetBundle:
    n = cfg.resolution
    grid = GridSpec(ndim=1, shape=(n,), periodic=True)
    inputs = np.empty((count, n, 1))
    outputs = np.empty((count, n, 1))
    for i in range(count):
        spec = _grf_spec("burgers", cfg, _sample_seed(seed, i))
        u0 = sample_grf(spec, grid)
        inputs[i, :, 0] = u0
        outputs[i, :, 0] = solve_burgers_1d(u0, cfg)
    return DatasetBundle(
        name=name,
        inputs=inputs,
        outputs=outputs,
        grid=grid,
        pde_meta={
            "family": "burgers",
            "nu": cfg.nu,
            "t_final": cfg.t_final,
            "seed": seed,
        },
        time_meta=TimeMeta(0.0, cfg.t_final, cfg.n_stored_steps),
    )


def _generate_darcy(name, count, cfg, seed) -> DatasetBundle:
    n = cfg.resolution
    grid = GridSpec(ndim=2, shape=(n, n))
    inputs = np.empty((count, n, n, 1))
    outputs = np.empty((count, n, n, 1))
    for i in range(count):
        spec = _grf_spec("darcy", cfg, _sample_seed(seed, i))
        z = sample_grf(spec, grid)
        a = np.where(z >= 0.0, DARCY_HIGH, DARCY_LOW)
        inputs[i, :, :, 0] = a
        outputs[i, :, :, 0] = solve_darcy_steady(a, cfg)
    return DatasetBundle(
        name=name,
        inputs=inputs,
        outputs=outputs,
        grid=grid,
        pde_meta={
            "family": "darcy",
            "beta": cfg.beta,
            "coefficient_values": [DARCY_LOW, DARCY_HIGH],
            "seed": seed,
        },
    )


def _generate_navier_stokes(name, count, cfg, seed) -> DatasetBundle:
    n = cfg.resolution
    grid = GridSpec(ndim=2, shape=(n, n), periodic=True)
    forcing = default_forcing(n)
    inputs = np.empty((count, n, n, 2))
    outputs = np.empty((count, n, n, 1))
    for i in range(count):
        spec = _grf_spec("navier-stokes", cfg, _sample_seed(seed, i))
        w0 = sample_grf(spec, grid)
        traj = solve_ns_vorticity(w0, forcing, cfg)
        inputs[i, :, :, 0] = w0
        inputs[i, :, :, 1] = forcing
        outputs[i, :, :, 0] = traj[-1]
    return DatasetBundle(
        name=name,
        inputs=inputs,
        outputs=outputs,
        grid=grid,
        pde_meta={
            "family": "navier-stokes",
            "nu": cfg.nu,
            "t_final": cfg.t_final,
            "forcing": "0.1*(sin+cos)(2*pi*(x+y))",
            "seed": seed,
        },
        time_meta=TimeMeta(0.0, cfg.t_final, cfg.n_stored_steps),
    )


def _generate_shallow_water(name, count, cfg, seed) -> DatasetBundle:
    n = cfg.resolution
    grid = GridSpec(ndim=2, shape=(n, n), periodic=True)
    x = grid.axis_coords(0)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    rsq = (xx - 0.5) ** 2 + (yy - 0.5) ** 2
    inputs = np.empty((count, n, n, 1))
    outputs = np.empty((count, n, n, 1))
    for i in range(count):
        rng = np.random.default_rng(_sample_seed(seed, i))
        radius = rng.uniform(0.15, 0.35)
        inner = rng.uniform(1.5, 2.5)
        h0 = np.where(rsq < radius**2, inner, 1.0)
        traj, _ = solve_shallow_water(h0, None, None, None, cfg)
        inputs[i, :, :, 0] = h0
        outputs[i, :, :, 0] = traj[-1][..., 0]
    return DatasetBundle(
        name=name,
        inputs=inputs,
        outputs=outputs,
        grid=grid,
        pde_meta={
            "family": "shallow-water",
            "g": cfg.g,
            "t_final": cfg.t_final,
            "initial_condition": "radial dam break",
            "seed": seed,
        },
        time_meta=TimeMeta(0.0, cfg.t_final, cfg.n_stored_steps),
    )


def _generate_elastic(name, count, cfg, seed) -> DatasetBundle:
    m = cfg.resolution
    grid = GridSpec(ndim=2, shape=(m, m))
    keys = ("sxx", "syy", "sxy") if name == "stress" else ("exx", "eyy", "exy")
    inputs = np.empty((count, m, m, 1))
    outputs = np.empty((count, m, m, 3))
    for i in range(count):
        micro = sample_microstructure(m, _sample_seed(seed, i))
        fields = solve_plane_stress_composite(micro, cfg)
        inputs[i, :, :, 0] = micro.phases
        for c, key in enumerate(keys):
            outputs[i, :, :, c] = fields[key]
    return DatasetBundle(
        name=name,
        inputs=inputs,
        outputs=outputs,
        grid=grid,
        pde_meta={
            "family": name,
            "modulus_ratio": cfg.modulus_ratio,
            "applied_strain": cfg.applied_strain,
            "poisson_ratio": cfg.poisson_ratio,
            "components": list(keys),
            "seed": seed,
        },
    )
