"""Plane-stress FEM for two-phase composites under mode-I tension.

The unit-square plate is meshed with one bilinear quadrilateral element per
microstructure pixel.  Both phases are linear elastic with a common Poisson
ratio and Young's moduli in the configured stiff/soft ratio.  Boundary
conditions: every bottom-edge node is fixed vertically, the bottom-left
node is also pinned horizontally (rigid modes removed, lateral contraction
free), and the top edge gets a prescribed vertical displacement equal to
the applied strain times the plate height.  The sparse SPD system is solved
by Jacobi-preconditioned conjugate gradients; strains come from the
displacement field at element centers and stresses from Hooke's law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ConfigurationError, SolverError
from ..grids import GridSpec
from .common import SolverConfig
from .grf import GRFSpec, sample_grf

CG_TOL = 1e-10
E_SOFT = 1.0
GAUSS = 1.0 / np.sqrt(3.0)


@dataclass(frozen=True)
class Microstructure:
    """Binary phase map on the pixel grid: 0 = soft, 1 = stiff."""

    phases: np.ndarray
    stiff_fraction: float

    def __post_init__(self):
        phases = np.asarray(self.phases)
        if phases.ndim != 2:
            raise ConfigurationError("phase map must be 2D")
        if not np.all((phases == 0) | (phases == 1)):
            raise ConfigurationError("phase map must be binary")
        object.__setattr__(self, "phases", phases.astype(np.int8))
        n_cells = phases.size
        # Equal phase fractions up to one cell's worth of rounding.
        if abs(self.stiff_fraction - 0.5) > 0.5 / n_cells + 1e-12:
            raise ConfigurationError(
                f"stiff fraction {self.stiff_fraction} not 0.5 within one cell"
            )


def sample_microstructure(m: int, seed) -> Microstructure:
    """Random equal-fraction phase map: a random field thresholded at its median."""
    grid = GridSpec(ndim=2, shape=(m, m), periodic=True)
    field = sample_grf(GRFSpec(alpha=2.0, tau=3.0, ndim=2, seed=seed, k_max=16), grid)
    flat = field.ravel()
    order = np.argsort(flat, kind="stable")
    n_cells = flat.size
    phases = np.zeros(n_cells, dtype=np.int8)
    phases[order[n_cells // 2 :]] = 1  # upper half of values is the stiff phase
    stiff_fraction = float(phases.mean())
    return Microstructure(phases=phases.reshape(m, m), stiff_fraction=stiff_fraction)


def _plane_stress_d(e_mod: float, nu: float) -> np.ndarray:
    c = e_mod / (1.0 - nu * nu)
    return c * np.array(
        [[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]]
    )


def _shape_gradients(xi: float, eta: float, hx: float, hy: float) -> np.ndarray:
    """d/dx and d/dy of the four bilinear shape functions at (xi, eta).

    Node order: (0,0), (1,0), (1,1), (0,1) in local pixel coordinates.
    """
    dn_dxi = 0.25 * np.array(
        [-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)]
    )
    dn_deta = 0.25 * np.array(
        [-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)]
    )
    return np.stack([dn_dxi * 2.0 / hx, dn_deta * 2.0 / hy])


def _b_matrix(xi: float, eta: float, hx: float, hy: float) -> np.ndarray:
    g = _shape_gradients(xi, eta, hx, hy)
    B = np.zeros((3, 8))
    B[0, 0::2] = g[0]  # eps_xx = du_x/dx
    B[1, 1::2] = g[1]  # eps_yy = du_y/dy
    B[2, 0::2] = g[1]  # gamma_xy = du_x/dy + du_y/dx
    B[2, 1::2] = g[0]
    return B


def _unit_element_stiffness(nu: float, hx: float, hy: float) -> np.ndarray:
    """Element stiffness for E = 1; scales linearly with the modulus."""
    D = _plane_stress_d(1.0, nu)
    K = np.zeros((8, 8))
    detj = hx * hy / 4.0
    for xi in (-GAUSS, GAUSS):
        for eta in (-GAUSS, GAUSS):
            B = _b_matrix(xi, eta, hx, hy)
            K += B.T @ D @ B * detj
    return K


def _node_ids(m: int) -> np.ndarray:
    """Element-to-node connectivity for an m x m pixel mesh."""
    nn = m + 1
    i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    n00 = i * nn + j
    n10 = (i + 1) * nn + j
    n11 = (i + 1) * nn + (j + 1)
    n01 = i * nn + (j + 1)
    return np.stack([n00, n10, n11, n01], axis=-1).reshape(-1, 4)


def assemble_system(
    micro: Microstructure, cfg: SolverConfig
) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray, np.ndarray]:
    """Global stiffness plus the Dirichlet data of the mode-I load case.

    Returns ``(K, fixed_dofs, fixed_values, elem_modulus)`` where the node
    index convention is x-major: node (i, j) sits at (i * h, j * h) and
    owns dofs (2 node, 2 node + 1) for (u_x, u_y).
    """
    m = micro.phases.shape[0]
    h = 1.0 / m
    e_stiff = E_SOFT * cfg.modulus_ratio
    elem_e = np.where(micro.phases.ravel() == 1, e_stiff, E_SOFT)
    ke = _unit_element_stiffness(cfg.poisson_ratio, h, h)
    conn = _node_ids(m)

    dofs = np.empty((conn.shape[0], 8), dtype=np.int64)
    dofs[:, 0::2] = 2 * conn
    dofs[:, 1::2] = 2 * conn + 1
    rows = np.repeat(dofs, 8, axis=1).ravel()
    cols = np.tile(dofs, (1, 8)).ravel()
    vals = (elem_e[:, None, None] * ke[None, :, :]).ravel()
    ndof = 2 * (m + 1) * (m + 1)
    K = sp.csr_matrix((vals, (rows, cols)), shape=(ndof, ndof))

    nn = m + 1
    bottom_nodes = np.arange(nn) * nn + 0          # j = 0
    top_nodes = np.arange(nn) * nn + m             # j = m
    fixed, values = [], []
    for node in bottom_nodes:
        fixed.append(2 * node + 1)
        values.append(0.0)
    fixed.append(2 * bottom_nodes[0])              # pin u_x at one corner
    values.append(0.0)
    u_top = cfg.applied_strain * 1.0               # strain times plate height
    for node in top_nodes:
        fixed.append(2 * node + 1)
        values.append(u_top)
    return K, np.asarray(fixed), np.asarray(values), elem_e


def solve_plane_stress_composite(
    micro: Microstructure, cfg: SolverConfig, dense: bool = False
) -> dict[str, np.ndarray]:
    """Solve the composite plate; fields are returned at element centers.

    Keys: sxx, syy, sxy (stresses), exx, eyy, exy (engineering strains),
    ux, uy (displacements averaged from element nodes), reaction_bottom,
    reaction_top (total vertical reactions on the constrained edges).
    ``dense=True`` solves the reduced system directly instead of by CG
    (only sensible for tiny meshes; used by the dense-oracle test).
    """
    m = micro.phases.shape[0]
    K, fixed, fixed_vals, elem_e = assemble_system(micro, cfg)
    ndof = K.shape[0]
    mask = np.zeros(ndof, dtype=bool)
    mask[fixed] = True
    free = np.nonzero(~mask)[0]
    if free.size == 0:
        raise ConfigurationError("no free degrees of freedom")

    u = np.zeros(ndof)
    u[fixed] = fixed_vals
    rhs = -K[:, fixed] @ fixed_vals
    rhs = rhs[free]
    K_ff = K[free][:, free].tocsr()

    if dense:
        u_free = np.linalg.solve(K_ff.toarray(), rhs)
    else:
        diag = K_ff.diagonal()
        if np.any(diag <= 0):
            raise ConfigurationError("singular system: insufficient constraints")
        precond = spla.LinearOperator(
            K_ff.shape, matvec=lambda x: x / diag
        )
        u_free, cg_info = spla.cg(
            K_ff, rhs, rtol=CG_TOL, atol=0.0, maxiter=20000, M=precond
        )
        if cg_info != 0:
            raise SolverError(
                f"conjugate gradients did not converge (info={cg_info})"
            )
    u[free] = u_free

    # Element-center strains and stresses.
    h = 1.0 / m
    conn = _node_ids(m)
    dofs = np.empty((conn.shape[0], 8), dtype=np.int64)
    dofs[:, 0::2] = 2 * conn
    dofs[:, 1::2] = 2 * conn + 1
    ue = u[dofs]                                   # (n_elem, 8)
    B0 = _b_matrix(0.0, 0.0, h, h)
    strains = ue @ B0.T                            # (n_elem, 3)
    D_unit = _plane_stress_d(1.0, cfg.poisson_ratio)
    stresses = (strains @ D_unit.T) * elem_e[:, None]

    nodal = u.reshape(-1, 2)
    ux_e = nodal[conn, 0].mean(axis=1)
    uy_e = nodal[conn, 1].mean(axis=1)

    reactions = K @ u
    nn = m + 1
    bottom_y = 2 * (np.arange(nn) * nn + 0) + 1
    top_y = 2 * (np.arange(nn) * nn + m) + 1

    def grid2d(flat: np.ndarray) -> np.ndarray:
        return flat.reshape(m, m)

    return {
        "sxx": grid2d(stresses[:, 0]),
        "syy": grid2d(stresses[:, 1]),
        "sxy": grid2d(stresses[:, 2]),
        "exx": grid2d(strains[:, 0]),
        "eyy": grid2d(strains[:, 1]),
        "exy": grid2d(strains[:, 2]),
        "ux": grid2d(ux_e),
        "uy": grid2d(uy_e),
        "displacement": u,
        "reaction_bottom": float(reactions[bottom_y].sum()),
        "reaction_top": float(reactions[top_y].sum()),
    }
