"""Steady Darcy flow on the unit square by pseudo-transient marching.

Finds the steady state of  u_t = div(a grad u) + f  with u = 0 on the
boundary, which solves -div(a grad u) = f.  The spatial operator is a
finite-difference flux form with harmonic-mean interface coefficients, so
fluxes stay continuous across jumps of the coefficient field.  Backward
Euler with a large pseudo-time step is unconditionally stable; the sparse
system is factored once and the march stops when the steady residual
max|div(a grad u) + f| drops below tolerance.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ConfigurationError, DomainError, SolverError
from .common import SolverConfig

RESIDUAL_TOL = 1e-6
MAX_MARCH_STEPS = 200


def _harmonic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 2.0 * a * b / (a + b)


def face_coefficients(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Harmonic-mean coefficients on x-faces and y-faces of the node grid."""
    ax = _harmonic(a[:-1, :], a[1:, :])
    ay = _harmonic(a[:, :-1], a[:, 1:])
    return ax, ay


def apply_operator(a: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    """div(a grad u) at interior nodes, zero-Dirichlet boundary assumed."""
    ax, ay = face_coefficients(a)
    flux_x = ax * (u[1:, :] - u[:-1, :]) / h
    flux_y = ay * (u[:, 1:] - u[:, :-1]) / h
    div = np.zeros_like(u)
    div[1:-1, 1:-1] = (
        (flux_x[1:, 1:-1] - flux_x[:-1, 1:-1]) / h
        + (flux_y[1:-1, 1:] - flux_y[1:-1, :-1]) / h
    )
    return div[1:-1, 1:-1]


def build_matrix(a: np.ndarray, h: float) -> sp.csc_matrix:
    """Assemble -div(a grad .) over interior nodes as a sparse SPD matrix."""
    n = a.shape[0]
    m = n - 2  # interior nodes per axis
    ax, ay = face_coefficients(a)
    idx = np.arange(m * m).reshape(m, m)
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(v.ravel())

    # interior node (i, j) of the full grid is (i - 1, j - 1) here
    aw = ax[:-1, 1:-1]  # west face of interior node
    ae = ax[1:, 1:-1]
    as_ = ay[1:-1, :-1]
    an = ay[1:-1, 1:]
    diag = (aw + ae + as_ + an) / h**2
    add(idx, idx, diag)
    add(idx[1:, :], idx[:-1, :], -ae[:-1, :] / h**2)
    add(idx[:-1, :], idx[1:, :], -aw[1:, :] / h**2)
    add(idx[:, 1:], idx[:, :-1], -an[:, :-1] / h**2)
    add(idx[:, :-1], idx[:, 1:], -as_[:, 1:] / h**2)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csc_matrix((vals, (rows, cols)), shape=(m * m, m * m))


def solve_darcy_steady(a: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Steady pressure field for coefficient field ``a`` and force f = beta.

    ``a`` is node-centered on an endpoint-inclusive n x n grid; the returned
    field carries the zero Dirichlet boundary explicitly.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigurationError(f"coefficient field must be square 2D, got {a.shape}")
    if np.any(a <= 0):
        raise DomainError("coefficient field must be positive everywhere")
    n = a.shape[0]
    h = 1.0 / (n - 1)
    f = np.full((n - 2) * (n - 2), float(cfg.beta))

    A = build_matrix(a, h)
    # Pseudo-time step: large enough to converge in a few implicit steps,
    # scaled like the inverse of the smallest operator eigenvalue.
    dt = cfg.dt if cfg.dt is not None else 10.0
    m = n - 2
    lhs = sp.identity(m * m, format="csc") / dt + A
    solver = spla.splu(lhs)

    u = np.zeros((n, n))
    for _ in range(MAX_MARCH_STEPS):
        interior = u[1:-1, 1:-1].ravel()
        interior = solver.solve(interior / dt + f)
        u[1:-1, 1:-1] = interior.reshape(m, m)
        residual = np.max(np.abs(apply_operator(a, u, h) + cfg.beta))
        if residual < RESIDUAL_TOL:
            return u
    raise SolverError(
        f"pseudo-transient march did not reach residual {RESIDUAL_TOL:g} "
        f"within {MAX_MARCH_STEPS} steps",
        residual=float(residual),
    )
