"""Acceptance gate: ten criteria, one test and one pass/fail line each.

Tolerances and budgets are stated inline; the desk-scale learning tests
(06, 08, 09) train real models on generated data and dominate the
runtime. Module fixtures cache datasets and trained states so criteria
sharing a model pay for training once; budget assertions charge every
test the full build time of each fixture it uses, which over-counts for
shared fixtures and therefore never flatters a slow criterion.
"""
import dataclasses
import time

import numpy as np
import pytest
import torch
import yaml
from click.testing import CliRunner

from opbench.cli import main as cli_main
from opbench.datagen import SolverConfig, generate_dataset
from opbench.datagen.burgers import solve_burgers_1d
from opbench.datagen.darcy import solve_darcy_steady
from opbench.datagen.elasticity import Microstructure, solve_plane_stress_composite
from opbench.datagen.navier_stokes import solve_ns_vorticity
from opbench.datagen.shallow_water import solve_shallow_water
from opbench.errors import DegenerateReferenceError
from opbench.grids import GridSpec, relative_l2
from opbench.models import (
    MESH_INVARIANT_FAMILIES,
    ModelSpec,
    build_model,
    compute_pod_basis,
    count_params,
    linear_attention,
    predict,
)
from opbench.models.deeponet import DeepONet
from opbench.models.fno import SpectralConv
from opbench.models.wno import haar_dwt_2d, haar_idwt_2d
from opbench.tasks import Harness
from opbench.training import TrainConfig, split_dataset

# Build seconds per module fixture, for the per-test budget assertions.
FIXTURE_SECONDS: dict[str, float] = {}


def _budget(t0: float, limit: float, *fixtures: str) -> None:
    spent = time.perf_counter() - t0 + sum(FIXTURE_SECONDS.get(f, 0.0) for f in fixtures)
    assert spent < limit, f"criterion took {spent:.0f}s, budget {limit:.0f}s"


def _bundle(name, count, seed=0, **solver):
    cfg = SolverConfig(**solver) if solver else None
    b = generate_dataset(name, count, cfg, seed=seed)
    b = dataclasses.replace(b, splits=split_dataset(count, seed=seed))
    return b.with_norm_from_train()


FNO = ModelSpec.make("fno", width=32, depth=4, k_max=12)
FNN = ModelSpec.make("fnn", width=32, depth=4)
FNO_SMALL = ModelSpec.make("fno", width=8, depth=2, k_max=4)
FNN_SMALL = ModelSpec.make("fnn", width=8, depth=1)

TRAIN = TrainConfig(
    learning_rate=2e-3,
    schedule="one-cycle",
    epochs=100,
    batch_size=20,
    seeds=(0,),
    deterministic=True,
)


@pytest.fixture(scope="module")
def harness():
    return Harness(TRAIN)


@pytest.fixture(scope="module")
def burgers_256(request):
    t0 = time.perf_counter()
    b = _bundle("burgers", 256)
    FIXTURE_SECONDS["burgers_256"] = time.perf_counter() - t0
    return b


@pytest.fixture(scope="module")
def darcy_47(request):
    t0 = time.perf_counter()
    b = _bundle("darcy", 400)
    FIXTURE_SECONDS["darcy_47"] = time.perf_counter() - t0
    return b


@pytest.fixture(scope="module")
def darcy_accuracy(harness, burgers_256, darcy_47):
    """FNO and FNN trained once on both criterion-06 datasets."""
    t0 = time.perf_counter()
    records = harness.run_accuracy([FNO, FNN], [burgers_256, darcy_47])
    FIXTURE_SECONDS["darcy_accuracy"] = time.perf_counter() - t0
    return {(r.model, r.dataset): r for r in records}


@pytest.fixture(scope="module")
def elasticity_pair():
    t0 = time.perf_counter()
    pair = (_bundle("stress", 200), _bundle("strain", 200))
    FIXTURE_SECONDS["elasticity_pair"] = time.perf_counter() - t0
    return pair


def test_01_relative_l2_oracle():
    t0 = time.perf_counter()
    fixtures = [
        (np.array([3.0, 4.0]), np.array([3.0, 4.0]), 0.0),
        (np.array([0.0, 0.0]), np.array([3.0, 4.0]), 1.0),
        (np.array([6.0, 8.0]), np.array([3.0, 4.0]), 1.0),
        (np.array([3.0, 0.0]), np.array([0.0, 4.0]), 1.25),
        (np.array([1.0, 1.0]), np.array([1.0, 0.0]), 1.0),
        (np.array([4.0, 3.0]), np.array([3.0, 4.0]), np.sqrt(2.0) / 5.0),
    ]
    for pred, truth, expected in fixtures:
        assert abs(relative_l2(pred, truth) - expected) <= 1e-12
    with pytest.raises(DegenerateReferenceError):
        relative_l2(np.ones(3), np.zeros(3))
    _budget(t0, 1.0)


def test_02_solver_oracles():
    t0 = time.perf_counter()

    # Burgers, linearized: integrating-factor stepping must reproduce the
    # analytic heat-kernel decay of a single sine mode.
    n = 128
    cfg = SolverConfig(resolution=n, nu=0.05, t_final=0.25)
    x = np.arange(n) / n
    u0 = np.sin(2 * np.pi * x)
    u = solve_burgers_1d(u0, cfg, nonlinear=False)
    exact = np.exp(-cfg.nu * (2 * np.pi) ** 2 * cfg.t_final) * u0
    assert relative_l2(u, exact) <= 1e-8

    # Darcy on 17x17 vs a dense direct solve of an independently assembled
    # 5-point system (constant coefficient, where the scheme is unambiguous).
    n = 17
    a0 = 4.0
    cfg = SolverConfig(resolution=n, beta=1.0)
    u = solve_darcy_steady(np.full((n, n), a0), cfg)
    h = 1.0 / (n - 1)
    m = n - 2
    lap1 = np.diag(np.full(m, 2.0)) - np.diag(np.ones(m - 1), 1) - np.diag(np.ones(m - 1), -1)
    eye = np.eye(m)
    A = (a0 / h**2) * (np.kron(lap1, eye) + np.kron(eye, lap1))
    ref = np.zeros((n, n))
    ref[1:-1, 1:-1] = np.linalg.solve(A, np.full(m * m, cfg.beta)).reshape(m, m)
    assert relative_l2(u, ref) <= 1e-6

    # Navier-Stokes: Taylor-Green vortex decays mode-exactly.
    n = 64
    nu = 1e-3
    cfg = SolverConfig(resolution=n, nu=nu, t_final=0.5, n_stored_steps=1)
    g = np.arange(n) / n
    xx, yy = np.meshgrid(g, g, indexing="ij")
    w0 = np.cos(2 * np.pi * xx) * np.cos(2 * np.pi * yy)
    w = solve_ns_vorticity(w0, None, cfg)[-1]
    exact = w0 * np.exp(-2 * (2 * np.pi) ** 2 * nu * cfg.t_final)
    assert relative_l2(w, exact) <= 1e-6

    # Shallow water: a lake at rest stays at rest and conserves mass.
    n = 32
    cfg = SolverConfig(resolution=n, g=1.0, t_final=0.5, n_stored_steps=2)
    traj, info = solve_shallow_water(np.ones((n, n)), None, None, None, cfg)
    assert float(np.abs(traj[-1] - traj[0]).max()) <= 1e-12
    mass = np.asarray(info["mass_history"])
    assert float(np.abs(np.diff(mass)).max()) <= 1e-10

    # Elasticity: a homogeneous plate under uniaxial stretch is spatially
    # uniform and its edge reactions balance.
    m = 8
    phases = (np.indices((m, m)).sum(axis=0) % 2).astype(np.int8)
    micro = Microstructure(phases=phases, stiff_fraction=0.5)
    cfg = SolverConfig(resolution=m, modulus_ratio=1.0, applied_strain=0.02)
    fields = solve_plane_stress_composite(micro, cfg)
    assert float(np.abs(fields["eyy"] - cfg.applied_strain).max()) <= 1e-8 * cfg.applied_strain
    top, bottom = float(fields["reaction_top"]), float(fields["reaction_bottom"])
    assert abs(top + bottom) / max(abs(top), abs(bottom)) <= 1e-8

    _budget(t0, 120.0)


def _naive_dft_reference_1d(layer, x):
    n = x.shape[1]
    xn = x.numpy()
    X = np.zeros(x.shape[:2] + x.shape[2:], dtype=complex)
    for k in range(n):
        for j in range(n):
            X[:, k] += xn[:, j] * np.exp(-2j * np.pi * j * k / n)
    with torch.no_grad():
        Y = layer.mix_spectrum(torch.from_numpy(X)).numpy()
    y = np.zeros(Y.shape, dtype=complex)
    for j in range(n):
        for k in range(n):
            y[:, j] += Y[:, k] * np.exp(2j * np.pi * j * k / n)
    return y.real / n


def _naive_dft_reference_2d(layer, x):
    n1, n2 = x.shape[1], x.shape[2]
    xn = x.numpy()
    X = np.zeros(x.shape, dtype=complex)
    for k1 in range(n1):
        for k2 in range(n2):
            phase = np.exp(
                -2j
                * np.pi
                * (
                    np.arange(n1)[:, None] * k1 / n1
                    + np.arange(n2)[None, :] * k2 / n2
                )
            )
            X[:, k1, k2] = (xn * phase[None, :, :, None]).sum(axis=(1, 2))
    with torch.no_grad():
        Y = layer.mix_spectrum(torch.from_numpy(X)).numpy()
    y = np.zeros(Y.shape, dtype=complex)
    for j1 in range(n1):
        for j2 in range(n2):
            phase = np.exp(
                2j
                * np.pi
                * (
                    np.arange(n1)[:, None] * j1 / n1
                    + np.arange(n2)[None, :] * j2 / n2
                )
            )
            y[:, j1, j2] = (Y * phase[None, :, :, None]).sum(axis=(1, 2))
    return y.real / (n1 * n2)


def test_03_layer_oracles():
    t0 = time.perf_counter()

    # Spectral conv against an O(n^2) directly summed transform, in both
    # dimensions and at an odd size (the matmul transform path).
    torch.manual_seed(0)
    layer = SpectralConv(2, 3, 2, ndim=1).double()
    x = torch.randn(2, 8, 2, dtype=torch.float64)
    with torch.no_grad():
        got = layer(x).numpy()
    assert np.abs(got - _naive_dft_reference_1d(layer, x)).max() <= 1e-10

    for n in (8, 9):
        layer = SpectralConv(1, 1, 2, ndim=2).double()
        x = torch.randn(1, n, n, 1, dtype=torch.float64)
        with torch.no_grad():
            got = layer(x).numpy()
        assert np.abs(got - _naive_dft_reference_2d(layer, x)).max() <= 1e-10

    # Haar: two-level analysis/synthesis is a perfect reconstruction pair.
    x = torch.randn(3, 2, 16, 16, dtype=torch.float64, generator=torch.Generator().manual_seed(1))
    assert float((haar_idwt_2d(*haar_dwt_2d(x)) - x).abs().max()) <= 1e-10

    # DeepONet with a stubbed branch/trunk evaluates its closed form exactly:
    # branch (2, -1) against trunk (y, 1) is the function 2y - 1.
    model = DeepONet(2, 1, 4, 1, p=2, sensors=4, ndim=1).double()

    class _Branch(torch.nn.Module):
        def forward(self, x):
            return torch.tensor([[2.0, -1.0]], dtype=torch.float64).expand(x.shape[0], -1)

    class _Trunk(torch.nn.Module):
        def forward(self, coords):
            return torch.cat([coords, torch.ones_like(coords)], dim=-1)

    model.branch = _Branch()
    model.trunk = _Trunk()
    with torch.no_grad():
        model.bias.zero_()
    coords = torch.tensor([0.0, 0.25, 0.5, 1.0], dtype=torch.float64)
    xin = torch.stack([torch.randn(4, dtype=torch.float64), coords], dim=-1)[None]
    out = model(xin)[0, :, 0].detach().numpy()
    np.testing.assert_allclose(out, (2 * coords - 1).numpy(), atol=1e-12)

    # Linear attention against the explicit quadratic evaluation.
    g = torch.Generator().manual_seed(2)
    q = torch.randn(5, 4, dtype=torch.float64, generator=g)
    k = torch.randn(5, 4, dtype=torch.float64, generator=g)
    v = torch.randn(5, 3, dtype=torch.float64, generator=g)
    out = linear_attention(q, k, v).numpy()
    phi = lambda z: np.where(z > 0, z + 1.0, np.exp(z))
    qn, kn, vn = q.numpy(), k.numpy(), v.numpy()
    ref = np.empty((5, 3))
    for i in range(5):
        w = np.array([phi(qn[i]) @ phi(kn[j]) for j in range(5)])
        ref[i] = (w[:, None] * vn).sum(axis=0) / w.sum()
    assert np.abs(out - ref).max() <= 1e-10

    # POD basis: orthonormal columns, reconstruction error monotone in p.
    rng = np.random.default_rng(3)
    data = rng.normal(size=(20, 6, 6, 1))
    _, modes, _ = compute_pod_basis(data, p=8)
    assert np.abs(modes.T @ modes - np.eye(8)).max() <= 1e-10
    flat = data.reshape(20, -1)
    errs = []
    for p in range(1, 9):
        mean, modes, _ = compute_pod_basis(data, p=p)
        recon = mean + (flat - mean) @ modes @ modes.T
        errs.append(np.linalg.norm(recon - flat))
    assert all(errs[i + 1] <= errs[i] + 1e-12 for i in range(7))

    _budget(t0, 60.0)


def test_04_gradient_checks():
    # Central finite differences in float64 for every family, every
    # parameter block; the shared harness lives beside the per-family
    # cases and asserts relative error < 1e-4 on <= 8x8 instances.
    import test_model_gradients as fd

    t0 = time.perf_counter()
    for case in (
        fd.test_fnn,
        fd.test_resnet,
        fd.test_unet,
        fd.test_cgan_generator_and_discriminator,
        fd.test_deeponet,
        fd.test_pod_deeponet,
        fd.test_fno,
        fd.test_fno_1d,
        fd.test_wno_with_details,
        fd.test_sno,
        fd.test_oformer_with_rollout,
        fd.test_gnot,
    ):
        case()
    _budget(t0, 300.0)


MESH_SPECS = {
    "fno": ModelSpec.make("fno", 8, 2, k_max=4),
    "sno": ModelSpec.make("sno", 8, 2, k_max=4),
    "deeponet": ModelSpec.make("deeponet", 8, 1, p=3, sensors=4),
    "oformer": ModelSpec.make("oformer", 8, 1, heads=2, rff_features=4),
    "gnot": ModelSpec.make("gnot", 8, 1, heads=2, experts=2),
}


def test_05_mesh_invariance():
    t0 = time.perf_counter()
    assert set(MESH_SPECS) == set(MESH_INVARIANT_FAMILIES)
    for family in MESH_INVARIANT_FAMILIES:
        spec = MESH_SPECS[family]
        coarse = build_model(spec, 1, 1, GridSpec(ndim=2, shape=(16, 16)), seed=0)
        fine = build_model(spec, 1, 1, GridSpec(ndim=2, shape=(64, 64)), seed=0)
        assert count_params(coarse) == count_params(fine), family
        unseen = GridSpec(ndim=2, shape=(24, 24))
        y = predict(coarse, np.random.default_rng(5).normal(size=(2, 24, 24, 1)), grid=unseen)
        assert y.shape == (2, 24, 24, 1)
        assert np.isfinite(y).all(), family
    _budget(t0, 60.0)


def test_06_desk_scale_learning(harness, burgers_256, darcy_47, darcy_accuracy):
    t0 = time.perf_counter()
    fno_burgers = darcy_accuracy[("fno-w32d4[k_max=12]", "burgers")]
    fnn_burgers = darcy_accuracy[("fnn-w32d4", "burgers")]
    fno_darcy = darcy_accuracy[("fno-w32d4[k_max=12]", "darcy")]
    fnn_darcy = darcy_accuracy[("fnn-w32d4", "darcy")]
    for rec in (fno_burgers, fnn_burgers, fno_darcy, fnn_darcy):
        assert rec.rel_l2_mean is not None, rec.model

    assert fno_burgers.rel_l2_mean <= 0.05, f"burgers fno {fno_burgers.rel_l2_mean:.4f}"
    assert fno_darcy.rel_l2_mean <= 0.10, f"darcy fno {fno_darcy.rel_l2_mean:.4f}"
    assert fno_burgers.rel_l2_mean < fnn_burgers.rel_l2_mean
    assert fno_darcy.rel_l2_mean < fnn_darcy.rel_l2_mean

    _budget(t0, 1800.0, "burgers_256", "darcy_47", "darcy_accuracy")


def test_07_degeneracy_identities():
    t0 = time.perf_counter()
    small_train = TrainConfig(
        learning_rate=2e-3,
        schedule="one-cycle",
        epochs=4,
        batch_size=8,
        seeds=(0,),
        deterministic=True,
    )
    h = Harness(small_train)
    models = [FNN_SMALL, FNO_SMALL]
    burgers = _bundle("burgers", 40, resolution=16)
    stress = _bundle("stress", 30, resolution=16)
    strain = _bundle("strain", 30, resolution=16)

    def payload(rec):
        return (rec.rel_l2_mean, rec.rel_l2_std, rec.n_excluded)

    acc = {
        (r.model, r.dataset): r
        for r in h.run_accuracy(models, [burgers, stress, strain])
    }

    for rec in h.run_noise(models, burgers, levels=(0.0, 0.08)):
        if rec.parameter == "gamma=0":
            assert payload(rec) == payload(acc[(rec.model, "burgers")])

    for rec in h.run_data_efficiency(models, burgers, fractions=(0.5, 1.0)):
        if rec.parameter == "fraction=1":
            assert payload(rec) == payload(acc[(rec.model, "burgers")])

    for rec in h.run_super_resolution([FNO_SMALL], {16: burgers}, 16, [16]):
        assert rec.parameter == "testres=16"
        assert payload(rec) == payload(acc[(rec.model, "burgers")])

    for rec in h.run_ood_swap(models, (stress, strain)):
        for name in ("stress", "strain"):
            if rec.parameter == f"train={name},test={name}":
                assert payload(rec) == payload(acc[(rec.model, name)])

    _budget(t0, 600.0)


def test_08_zero_shot_super_resolution(harness, darcy_47, darcy_accuracy):
    """Transfer to finer grids than the training discretization.

    The degradation this asserts (>= 5x error growth off the training
    resolution) does not occur for a resolution-scale-correct spectral
    operator on natively solved aligned data: the truncated modes are
    grid-independent, the coefficient fields are band-limited objects
    shared across resolutions, and the elliptic operator homogenizes
    away sub-grid detail. Measured here: the native 47-vs-128 operator
    discrepancy is ~2-4% rel-L2 (bilinear comparison on a shared probe
    lattice), so zero-shot error tracks the training error closely
    (ratios ~1.1-1.8x, even with inputs rough enough that 25%+ of
    binarized points flip between samplings). Reported degradations of
    this size trace to multi-resolution data built by subsampling or
    mixing sources, where the coarse grid crops or aliases the domain;
    that is a property of such data pipelines, not of the operator, and
    this suite's aligned native solves cannot reproduce it honestly.
    The assertion is kept at the stated threshold and fails.
    """
    t0 = time.perf_counter()
    bundles = {47: darcy_47, 64: _bundle("darcy", 400, resolution=64), 128: _bundle("darcy", 400, resolution=128)}
    records = harness.run_super_resolution([FNO], bundles, 47, [47, 64, 128])
    errs = {r.parameter: r.rel_l2_mean for r in records}
    base = errs["testres=47"]
    assert base is not None and base > 0
    ratio_64 = errs["testres=64"] / base
    ratio_128 = errs["testres=128"] / base
    _budget(t0, 1200.0, "darcy_47", "darcy_accuracy")
    assert min(ratio_64, ratio_128) >= 5.0, (
        f"zero-shot degradation 64x: {ratio_64:.2f}x, 128x: {ratio_128:.2f}x "
        f"(train-res error {base:.4f}); see docstring for the analysis"
    )


def test_09_ood_swap_pattern(harness, elasticity_pair):
    t0 = time.perf_counter()
    records = harness.run_ood_swap([FNO], elasticity_pair)
    cells = {r.parameter: r.rel_l2_mean for r in records}
    for cell, value in cells.items():
        assert value is not None, f"cell {cell} failed"
    for trained, other in (("stress", "strain"), ("strain", "stress")):
        in_dist = cells[f"train={trained},test={trained}"]
        cross = cells[f"train={trained},test={other}"]
        assert cross >= 3.0 * in_dist, (
            f"train={trained}: cross {cross:.4f} vs in-dist {in_dist:.4f} "
            f"({cross / in_dist:.1f}x)"
        )
    _budget(t0, 1800.0, "elasticity_pair")


CLI_SUITE = {
    "datasets": [{"name": "burgers", "count": 24, "solver": {"resolution": 16}}],
    "models": [
        {"family": "fnn", "width": 8, "depth": 1},
        {"family": "fno", "width": 8, "depth": 2, "options": {"k_max": 4}},
    ],
    "train": {
        "learning_rate": 2.0e-3,
        "epochs": 2,
        "batch_size": 8,
        "seeds": [0, 1],
    },
    "tasks": ["accuracy", {"task": "noise", "params": {"dataset": "burgers", "levels": [0.0, 0.02]}}],
    "master_seed": 0,
}


def test_10_end_to_end_determinism(tmp_path):
    t0 = time.perf_counter()
    config = tmp_path / "suite.yaml"
    config.write_text(yaml.safe_dump(CLI_SUITE))
    runner = CliRunner()
    logs = []
    for out in ("a", "b"):
        result = runner.invoke(
            cli_main,
            ["benchmark", "--config", str(config), "--out", str(tmp_path / out)],
        )
        assert result.exit_code == 0, result.output
        logs.append((tmp_path / out / "records.jsonl").read_bytes())
    # 2 models x 2 seeds x (accuracy + 2 noise levels) = 12 records
    assert logs[0].count(b"\n") == 12
    assert logs[0] == logs[1]
    _budget(t0, 1800.0)
