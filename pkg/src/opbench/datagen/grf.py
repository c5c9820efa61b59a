"""Gaussian random fields with a truncated power-law spectrum.

Fields are periodic and defined by a finite set of Fourier coefficients with

    E |c_k|^2  =  scale^2 * (|k|^2 + tau^2)^(-alpha),

drawn once per seed over integer wavenumbers |k| <= k_max and then evaluated
at arbitrary sample points by direct trigonometric summation.  Because the
coefficients, not grid values, are the random object, the same seed yields
consistent fields at every resolution: solving one input at several grid
sizes stays meaningful, which the multi-resolution evaluation protocol
relies on.  The zero mode is dropped, so fields are mean-zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..grids import GridSpec


@dataclass(frozen=True)
class GRFSpec:
    """Distribution parameters and seed for one random-field draw stream."""

    alpha: float = 2.0
    tau: float = 1.0
    ndim: int = 1
    seed: int | tuple = 0
    k_max: int = 16
    scale: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")
        if self.tau <= 0:
            raise ConfigurationError(f"tau must be > 0, got {self.tau}")
        if self.ndim not in (1, 2):
            raise ConfigurationError(f"ndim must be 1 or 2, got {self.ndim}")
        if self.k_max < 1:
            raise ConfigurationError(f"k_max must be >= 1, got {self.k_max}")


def _sigma(spec: GRFSpec, ksq: np.ndarray) -> np.ndarray:
    # Amplitude of one complex coefficient; power spectrum is sigma^2.
    with np.errstate(under="ignore"):
        return spec.scale * (ksq + spec.tau**2) ** (-spec.alpha / 2.0)


def draw_coefficients(spec: GRFSpec) -> np.ndarray:
    """Draw the truncated Hermitian coefficient set for ``spec``.

    Returns a complex array: shape ``(k_max + 1,)`` in 1D (modes 0..k_max,
    entry 0 is zero) or ``(2 k_max + 1, 2 k_max + 1)`` in 2D (modes
    -k_max..k_max per axis, Hermitian-symmetric, zero at the origin).
    The draw order is fixed and independent of any grid, so a seed pins the
    field itself, not one discretization of it.
    """
    rng = np.random.default_rng(spec.seed)
    K = spec.k_max
    if spec.ndim == 1:
        k = np.arange(1, K + 1, dtype=np.float64)
        z = rng.standard_normal(2 * K)
        c = np.zeros(K + 1, dtype=np.complex128)
        c[1:] = _sigma(spec, k**2) * (z[0::2] + 1j * z[1::2]) / np.sqrt(2.0)
        return c
    # 2D: draw the independent half lattice (k1 > 0, or k1 == 0 and k2 > 0)
    # in a fixed order, then mirror conjugates onto the other half.
    free: list[tuple[int, int]] = []
    for k1 in range(0, K + 1):
        lo = 1 if k1 == 0 else -K
        for k2 in range(lo, K + 1):
            free.append((k1, k2))
    z = rng.standard_normal(2 * len(free))
    C = np.zeros((2 * K + 1, 2 * K + 1), dtype=np.complex128)
    for idx, (k1, k2) in enumerate(free):
        sig = _sigma(spec, float(k1 * k1 + k2 * k2))
        val = sig * (z[2 * idx] + 1j * z[2 * idx + 1]) / np.sqrt(2.0)
        C[K + k1, K + k2] = val
        C[K - k1, K - k2] = np.conj(val)
    return C


def evaluate_coefficients(
    spec: GRFSpec, coeffs: np.ndarray, axes: tuple[np.ndarray, ...]
) -> np.ndarray:
    """Evaluate the field of ``coeffs`` at the tensor product of ``axes``."""
    K = spec.k_max
    if spec.ndim == 1:
        (x,) = axes
        k = np.arange(1, K + 1, dtype=np.float64)
        basis = np.exp(2j * np.pi * np.outer(x, k))
        return 2.0 * np.real(basis @ coeffs[1:])
    x, y = axes
    kk = np.arange(-K, K + 1, dtype=np.float64)
    ex = np.exp(2j * np.pi * np.outer(x, kk))
    ey = np.exp(2j * np.pi * np.outer(y, kk))
    return np.real(ex @ coeffs @ ey.T)


def sample_grf(spec: GRFSpec, grid: GridSpec) -> np.ndarray:
    """Draw one field and sample it at the nodes of ``grid``.

    The field is periodic over the grid extent; non-periodic grids simply
    evaluate it at their (endpoint-inclusive) nodes.
    """
    if grid.ndim != spec.ndim:
        raise ConfigurationError(
            f"grid ndim {grid.ndim} does not match GRF ndim {spec.ndim}"
        )
    coeffs = draw_coefficients(spec)
    axes = tuple(
        grid.axis_coords(i) / grid.extent[i] for i in range(grid.ndim)
    )
    return evaluate_coefficients(spec, coeffs, axes)
