"""Shared solver configuration."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..errors import ConfigurationError


@dataclass(frozen=True)
class SolverConfig:
    """Resolution, time stepping, and physics constants for one solve.

    ``dt=None`` selects a stability-limited step automatically; explicit
    values are validated against each solver's stability bound rather than
    trusted.  Unused constants are ignored by solvers that do not need them.
    """

    resolution: int = 64
    dt: float | None = None
    t_final: float = 1.0
    nu: float = 0.01            # viscosity (Burgers, vorticity-form flow)
    g: float = 1.0              # gravitational acceleration (shallow water)
    beta: float = 1.0           # constant force term (steady Darcy)
    modulus_ratio: float = 10.0  # stiff/soft Young's modulus ratio
    applied_strain: float = 0.05  # prescribed top-edge strain (mode-I tension)
    poisson_ratio: float = 0.3
    n_stored_steps: int = 1
    cfl: float = 0.4
    boundary: str = "periodic"  # shallow water: periodic | reflective
    grf: dict = field(default_factory=dict)  # overrides for the input sampler

    def __post_init__(self):
        if self.resolution < 2:
            raise ConfigurationError(f"resolution must be >= 2, got {self.resolution}")
        if self.dt is not None and self.dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.t_final <= 0:
            raise ConfigurationError(f"t_final must be positive, got {self.t_final}")
        if self.n_stored_steps < 1:
            raise ConfigurationError("n_stored_steps must be >= 1")
        if not 0 < self.cfl <= 1:
            raise ConfigurationError(f"cfl must be in (0, 1], got {self.cfl}")
        if self.boundary not in ("periodic", "reflective"):
            raise ConfigurationError(f"unknown boundary '{self.boundary}'")


_DATASET_DEFAULTS = {
    # 1D viscous Burgers: smooth random initial states, moderate viscosity.
    "burgers": dict(resolution=128, nu=0.01, t_final=1.0),
    # Steady Darcy flow with a two-valued permeability field.
    "darcy": dict(resolution=47, beta=1.0),
    # 2D vorticity-form incompressible flow with fixed trigonometric forcing.
    "navier-stokes": dict(resolution=64, nu=1e-3, t_final=5.0, n_stored_steps=5),
    # Radial dam break over flat bathymetry.
    "shallow-water": dict(resolution=64, g=1.0, t_final=1.0, n_stored_steps=5),
    # Plane-stress composite under mode-I tension; shared microstructures.
    "stress": dict(resolution=32),
    "strain": dict(resolution=32),
}


def default_config(dataset: str) -> SolverConfig:
    """Standard desk-scale configuration for one generated dataset."""
    if dataset not in _DATASET_DEFAULTS:
        raise ConfigurationError(
            f"no default config for '{dataset}'; known: {sorted(_DATASET_DEFAULTS)}"
        )
    return SolverConfig(**_DATASET_DEFAULTS[dataset])


def with_overrides(cfg: SolverConfig, **kwargs) -> SolverConfig:
    return replace(cfg, **kwargs)
