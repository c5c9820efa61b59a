"""Fast self-checks against independent oracles.

Each check exercises one numerical component against a closed-form or
independently assembled reference.  The whole battery runs in seconds;
it is the `validate` command's backend and a smoke test for new
installs.  Failures carry the measured discrepancy.
"""
from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .container import read_container, write_container
from .datagen.burgers import solve_burgers_1d
from .datagen.common import SolverConfig
from .datagen.darcy import solve_darcy_steady
from .datagen.elasticity import (
    Microstructure,
    solve_plane_stress_composite,
)
from .datagen.navier_stokes import solve_ns_vorticity
from .datagen.shallow_water import solve_shallow_water
from .errors import DegenerateReferenceError, IntegrityError
from .grids import GridSpec, relative_l2
from .models import ModelSpec, build_model, param_hash


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _check_metric():
    cases = [
        (np.array([3.0, 4.0]), np.array([3.0, 4.0]), 0.0),
        (np.array([0.0, 0.0]), np.array([3.0, 4.0]), 1.0),
        (np.array([6.0, 8.0]), np.array([3.0, 4.0]), 1.0),
        (np.array([3.0, 0.0]), np.array([0.0, 4.0]), 1.25),
        (np.array([1.0, 1.0]), np.array([1.0, 0.0]), 1.0),
    ]
    worst = 0.0
    for pred, truth, expected in cases:
        worst = max(worst, abs(relative_l2(pred, truth) - expected))
    if worst > 1e-12:
        raise AssertionError(f"fixture error {worst:.2e}")
    try:
        relative_l2(np.ones(3), np.zeros(3))
    except DegenerateReferenceError:
        return f"5 fixtures, worst {worst:.1e}, degenerate raises"
    raise AssertionError("zero reference did not raise")


def _check_burgers():
    n = 128
    cfg = SolverConfig(resolution=n, nu=0.05, t_final=0.25)
    x = np.arange(n) / n
    u0 = np.sin(2 * np.pi * x)
    u = solve_burgers_1d(u0, cfg, nonlinear=False)
    exact = np.exp(-cfg.nu * (2 * np.pi) ** 2 * cfg.t_final) * u0
    err = relative_l2(u, exact)
    if err > 1e-10:
        raise AssertionError(f"linear decay error {err:.2e}")
    return f"integrating-factor decay error {err:.1e}"


def _check_darcy():
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    n = 17
    a0 = 4.0
    cfg = SolverConfig(resolution=n, beta=1.0)
    u = solve_darcy_steady(np.full((n, n), a0), cfg)
    # constant coefficient: any flux-consistent scheme reduces to the
    # plain 5-point Laplacian, assembled here independently
    h = 1.0 / (n - 1)
    m = n - 2
    lap1 = sp.diags([-1, 2, -1], [-1, 0, 1], shape=(m, m))
    eye = sp.identity(m)
    A = (a0 / h**2) * (sp.kron(lap1, eye) + sp.kron(eye, lap1))
    rhs = np.full(m * m, cfg.beta)
    ref = np.zeros((n, n))
    ref[1:-1, 1:-1] = spla.spsolve(A.tocsr(), rhs).reshape(m, m)
    err = relative_l2(u, ref)
    if err > 1e-6:
        raise AssertionError(f"error vs direct solve {err:.2e}")
    return f"17x17 constant-coefficient error vs direct solve {err:.1e}"


def _check_taylor_green():
    n = 64
    nu = 1e-3
    cfg = SolverConfig(resolution=n, nu=nu, t_final=0.5, n_stored_steps=1)
    x = np.arange(n) / n
    xx, yy = np.meshgrid(x, x, indexing="ij")
    w0 = np.cos(2 * np.pi * xx) * np.cos(2 * np.pi * yy)
    w = solve_ns_vorticity(w0, None, cfg)[-1]
    exact = w0 * np.exp(-2 * (2 * np.pi) ** 2 * nu * cfg.t_final)
    err = relative_l2(w, exact)
    if err > 1e-6:
        raise AssertionError(f"vortex decay error {err:.2e}")
    return f"vortex decay error {err:.1e}"


def _check_shallow_water():
    n = 32
    cfg = SolverConfig(resolution=n, g=1.0, t_final=0.5, n_stored_steps=2)
    traj, info = solve_shallow_water(np.ones((n, n)), None, None, None, cfg)
    drift = float(np.abs(traj[-1] - traj[0]).max())
    if drift > 1e-12:
        raise AssertionError(f"rest state drifted by {drift:.2e}")
    mass = np.asarray(info["mass_history"])
    mass_step = float(np.abs(np.diff(mass)).max())
    if mass_step > 1e-10:
        raise AssertionError(f"mass drift {mass_step:.2e} per step")
    return f"rest drift {drift:.1e}, mass drift {mass_step:.1e}/step"


def _check_elasticity():
    m = 8
    phases = (np.indices((m, m)).sum(axis=0) % 2).astype(np.int8)
    micro = Microstructure(phases=phases, stiff_fraction=0.5)
    cfg = SolverConfig(resolution=m, modulus_ratio=1.0, applied_strain=0.02)
    fields = solve_plane_stress_composite(micro, cfg)
    eyy_err = float(np.abs(fields["eyy"] - cfg.applied_strain).max())
    if eyy_err > 1e-8 * cfg.applied_strain:
        raise AssertionError(f"uniform plate eyy error {eyy_err:.2e}")
    top = float(fields["reaction_top"])
    bottom = float(fields["reaction_bottom"])
    balance = abs(top + bottom) / max(abs(top), abs(bottom))
    if balance > 1e-8:
        raise AssertionError(f"reaction imbalance {balance:.2e}")
    return f"uniform-plate strain error {eyy_err:.1e}, balance {balance:.1e}"


def _check_spectral_identity():
    import torch

    from .models.fno import SpectralConv

    n, k = 32, 8
    conv = SpectralConv(c_in=1, c_out=1, k_max=k, ndim=1)
    with torch.no_grad():
        conv.weight.zero_()
        conv.weight[..., 0, 0, 0] = 1.0
        g = torch.Generator().manual_seed(0)
        x = torch.randn(2, n, 1, dtype=torch.float64, generator=g)
        # identity mixing keeps every retained mode; bandlimit the input
        xf = torch.fft.rfft(x, dim=1)
        xf[:, k + 1 :] = 0
        x = torch.fft.irfft(xf, n=n, dim=1)
        y = conv(x.float()).double()
    err = float((y - x).abs().max())
    if err > 1e-6:
        raise AssertionError(f"identity transmission error {err:.2e}")
    return f"bandlimited identity error {err:.1e}"


def _check_haar():
    import torch

    from .models.wno import haar_dwt_2d, haar_idwt_2d

    x = torch.randn(3, 2, 16, 16, dtype=torch.float64, generator=torch.Generator().manual_seed(1))
    err = float((haar_idwt_2d(*haar_dwt_2d(x)) - x).abs().max())
    if err > 1e-10:
        raise AssertionError(f"reconstruction error {err:.2e}")
    return f"perfect-reconstruction error {err:.1e}"


def _check_linear_attention():
    import torch

    from .models.layers import linear_attention

    g = torch.Generator().manual_seed(2)
    q = torch.randn(5, 4, dtype=torch.float64, generator=g)
    k = torch.randn(5, 4, dtype=torch.float64, generator=g)
    v = torch.randn(5, 3, dtype=torch.float64, generator=g)
    out = linear_attention(q, k, v).numpy()
    phi = lambda z: np.where(z > 0, z + 1.0, np.exp(z))
    qn, kn, vn = q.numpy(), k.numpy(), v.numpy()
    ref = np.empty((5, 3))
    for i in range(5):
        weights = np.array([phi(qn[i]) @ phi(kn[j]) for j in range(5)])
        ref[i] = (weights[:, None] * vn).sum(axis=0) / weights.sum()
    err = float(np.abs(out - ref).max())
    if err > 1e-10:
        raise AssertionError(f"factored attention error {err:.2e}")
    return f"factored vs explicit error {err:.1e}"


def _check_container():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "box"
        tensors = {"a": np.arange(6.0).reshape(2, 3)}
        write_container(path, {"kind": "probe"}, tensors)
        meta, loaded = read_container(path)
        if meta["kind"] != "probe" or not np.array_equal(loaded["a"], tensors["a"]):
            raise AssertionError("round trip mismatch")
        blob = path / "a.f64"
        data = bytearray(blob.read_bytes())
        data[0] ^= 0xFF
        blob.write_bytes(bytes(data))
        try:
            read_container(path)
        except IntegrityError:
            return "round trip exact, tamper detected"
        raise AssertionError("tampered tensor was not detected")


def _check_model_determinism():
    grid = GridSpec(ndim=2, shape=(16, 16))
    spec = ModelSpec.make("fno", width=8, depth=2, k_max=4)
    a = build_model(spec, 1, 1, grid, seed=0)
    b = build_model(spec, 1, 1, grid, seed=0)
    if param_hash(a) != param_hash(b):
        raise AssertionError("same seed produced different parameters")
    return "seeded builds are bit-identical"


CHECKS = (
    ("metric-fixtures", _check_metric),
    ("burgers-linear-decay", _check_burgers),
    ("darcy-vs-direct-solve", _check_darcy),
    ("vortex-decay", _check_taylor_green),
    ("lake-at-rest", _check_shallow_water),
    ("uniform-plate", _check_elasticity),
    ("spectral-identity", _check_spectral_identity),
    ("haar-reconstruction", _check_haar),
    ("linear-attention", _check_linear_attention),
    ("container-integrity", _check_container),
    ("model-determinism", _check_model_determinism),
)


def run_validation() -> list[CheckResult]:
    """Run every check; never raises, failures are reported."""
    results = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            detail = fn()
            passed = True
        except Exception as err:  # report, never abort the battery
            detail = f"{type(err).__name__}: {err}"
            passed = False
        results.append(
            CheckResult(name, passed, detail, time.perf_counter() - t0)
        )
    return results
