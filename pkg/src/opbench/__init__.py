"""Benchmarking suite for data-driven PDE solvers.

Subpackages and modules:

- ``grids``: uniform-grid data model, normalization, and the relative-L2 metric.
- ``datagen``: classical numerical solvers and random input samplers used to
  build the benchmark datasets, plus adapters for external data layouts.
- ``models``: the eleven benchmarked architectures behind one model contract.
- ``training``: splits, optimizers, schedules, seed ensembles, checkpoints.
- ``tasks``: the six evaluation protocols over (models x datasets).
- ``store`` / ``container``: persistent results and the on-disk array format.
- ``cli``: config-driven command line entry point.
"""

__version__ = "0.1.0"
