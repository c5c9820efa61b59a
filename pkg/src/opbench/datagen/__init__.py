"""Dataset generation: input samplers, classical PDE solvers, ingestion.

Each benchmark dataset pairs random input functions (Gaussian random fields,
microstructures, or dam-break states) with outputs computed by a classical
numerical solver.  Externally published data enters through the adapters in
:mod:`opbench.datagen.ingest`.
"""

from .common import SolverConfig, default_config
from .grf import GRFSpec, sample_grf
from .burgers import solve_burgers_1d
from .darcy import solve_darcy_steady
from .navier_stokes import solve_ns_vorticity
from .shallow_water import solve_shallow_water
from .elasticity import Microstructure, sample_microstructure, solve_plane_stress_composite
from .generate import GENERATED_DATASETS, generate_dataset
from .ingest import ingest_external

__all__ = [
    "SolverConfig",
    "default_config",
    "GRFSpec",
    "sample_grf",
    "solve_burgers_1d",
    "solve_darcy_steady",
    "solve_ns_vorticity",
    "solve_shallow_water",
    "Microstructure",
    "sample_microstructure",
    "solve_plane_stress_composite",
    "GENERATED_DATASETS",
    "generate_dataset",
    "ingest_external",
]
