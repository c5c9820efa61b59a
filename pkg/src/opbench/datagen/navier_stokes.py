"""Pseudo-spectral solver for 2D incompressible flow in vorticity form.

Advances  w_t + u . grad w = nu * lap w + f  on the periodic unit square.
Velocity is recovered from vorticity through the streamfunction, which
enforces incompressibility exactly in Fourier space.  Diffusion uses
Crank-Nicolson; advection and forcing are explicit with 2/3-rule
dealiasing.  The zero mode is pinned to zero, so mean vorticity is
conserved exactly.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, SolverError
from .common import SolverConfig


def default_forcing(n: int) -> np.ndarray:
    """Fixed trigonometric forcing 0.1 (sin + cos)(2 pi (x + y))."""
    x = np.arange(n) / n
    xx, yy = np.meshgrid(x, x, indexing="ij")
    s = 2.0 * np.pi * (xx + yy)
    return 0.1 * (np.sin(s) + np.cos(s))


def velocity_from_vorticity(what: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Physical-space velocity components for spectral vorticity ``what``."""
    n = what.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n)
    kx = k[:, None]
    ky = k[None, :]
    ksq = kx**2 + ky**2
    inv = np.zeros_like(ksq)
    nonzero = ksq > 0
    inv[nonzero] = 1.0 / ((2.0 * np.pi) ** 2 * ksq[nonzero])
    psi_hat = what * inv
    ux = np.fft.ifft2(2j * np.pi * ky * psi_hat).real
    uy = np.fft.ifft2(-2j * np.pi * kx * psi_hat).real
    return ux, uy


def solve_ns_vorticity(
    w0: np.ndarray, forcing: np.ndarray | None, cfg: SolverConfig
) -> np.ndarray:
    """Integrate vorticity ``w0`` to t_final; returns stored snapshots.

    The result has shape ``(n_stored_steps, n, n)`` with snapshot times
    evenly spaced and ending at t_final.
    """
    w0 = np.asarray(w0, dtype=np.float64)
    if w0.ndim != 2 or w0.shape[0] != w0.shape[1]:
        raise ConfigurationError(f"w0 must be square 2D, got {w0.shape}")
    n = w0.shape[0]
    if abs(float(w0.mean())) > 1e-10:
        raise ConfigurationError("w0 must be mean-zero")
    if cfg.nu <= 0:
        raise ConfigurationError(f"viscosity must be positive, got {cfg.nu}")
    if forcing is None:
        forcing = np.zeros_like(w0)
    forcing = np.asarray(forcing, dtype=np.float64)
    if forcing.shape != w0.shape:
        raise ConfigurationError("forcing shape must match w0")

    k = np.fft.fftfreq(n, d=1.0 / n)
    kx = k[:, None]
    ky = k[None, :]
    lap = -((2.0 * np.pi) ** 2) * (kx**2 + ky**2)
    dealias = (np.abs(kx) < n / 3.0) & (np.abs(ky) < n / 3.0)
    f_hat = dealias * np.fft.fft2(forcing)
    f_hat[0, 0] = 0.0

    what = np.fft.fft2(w0)
    what[0, 0] = 0.0

    ux, uy = velocity_from_vorticity(what)
    umax = float(max(np.max(np.abs(ux)), np.max(np.abs(uy)), 1e-6))
    dx = 1.0 / n
    if cfg.dt is not None:
        dt = cfg.dt
    else:
        dt = min(cfg.cfl * dx / umax, 1e-2)
    n_steps = max(1, int(np.ceil(cfg.t_final / dt - 1e-12)))
    dt = cfg.t_final / n_steps

    # Snapshot steps at fractions j/k of the integration, ending exactly at T.
    store_at = np.unique(
        np.round(np.arange(1, cfg.n_stored_steps + 1) / cfg.n_stored_steps * n_steps)
        .astype(int)
    )
    snapshots = []

    # Crank-Nicolson factors for the diffusion half of the operator.
    cn_num = 1.0 + 0.5 * dt * cfg.nu * lap
    cn_den = 1.0 - 0.5 * dt * cfg.nu * lap

    for step in range(1, n_steps + 1):
        ux, uy = velocity_from_vorticity(what)
        umax = float(max(np.max(np.abs(ux)), np.max(np.abs(uy))))
        if dt > 2.0 * dx / max(umax, 1e-12):
            raise SolverError(
                f"advective CFL violated at step {step} (max|u|={umax:.3g})",
                suggested_dt=cfg.cfl * dx / umax,
            )
        wx = np.fft.ifft2(2j * np.pi * kx * what).real
        wy = np.fft.ifft2(2j * np.pi * ky * what).real
        adv_hat = dealias * np.fft.fft2(ux * wx + uy * wy)
        what = (cn_num * what + dt * (f_hat - adv_hat)) / cn_den
        what[0, 0] = 0.0
        if step in store_at:
            w = np.fft.ifft2(what).real
            if not np.all(np.isfinite(w)):
                raise SolverError(
                    "vorticity became non-finite", suggested_dt=dt / 2.0
                )
            snapshots.append(w)
    return np.stack(snapshots)
