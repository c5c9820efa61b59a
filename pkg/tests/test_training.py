"""Training protocol: split rule, schedules, convergence, checkpoint
selection, divergence policy, and batch-invariant evaluation."""

import dataclasses
import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from opbench.errors import (
    ConfigurationError,
    DegenerateReferenceError,
    TrainingDivergedError,
)
from opbench.grids import DatasetBundle, GridSpec, normalize_array
from opbench.models import ModelSpec, build_model, param_hash
from opbench.models.base import _assemble_input
from opbench.training import (
    EvalResult,
    SeedOutcome,
    TrainConfig,
    _normalized_metric,
    evaluate,
    schedule_factor,
    split_dataset,
    summarize_seeds,
    train,
)


def _linear_bundle(n=40, res=16, seed=0, slope=2.0, intercept=1.0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, res, 1))
    y = slope * x + intercept
    bundle = DatasetBundle(
        name="linear-synthetic",
        inputs=x,
        outputs=y,
        grid=GridSpec(ndim=1, shape=(res,)),
        splits=split_dataset(n, seed=0),
    )
    return bundle.with_norm_from_train()


class TestTrainConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.batch_size == 20
        assert len(cfg.seeds) == 3
        assert cfg.epochs == 500

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"optimizer": "sgd"},
            {"schedule": "exponential"},
            {"learning_rate": 1.0},
            {"learning_rate": 1e-6},
            {"epochs": -1},
            {"batch_size": 0},
            {"seeds": ()},
            {"grad_clip": 0.0},
        ],
    )
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ConfigurationError):
            TrainConfig(**kwargs)

    def test_repeated_seeds_allowed(self):
        cfg = TrainConfig(seeds=(3, 3))
        assert cfg.seeds == (3, 3)


class TestSplitDataset:
    def test_published_count(self):
        splits = split_dataset(1700)
        assert len(splits["train"]) == 1360
        assert len(splits["val"]) == 170
        assert len(splits["test"]) == 170

    def test_small_count_floor_rule(self):
        splits = split_dataset(10)
        assert (len(splits["train"]), len(splits["val"]), len(splits["test"])) == (
            8,
            1,
            1,
        )

    def test_remainder_goes_to_train(self):
        splits = split_dataset(10, fractions=(0.34, 0.33, 0.33))
        assert (len(splits["train"]), len(splits["val"]), len(splits["test"])) == (
            4,
            3,
            3,
        )

    def test_same_seed_identical(self):
        a = split_dataset(57, seed=4)
        b = split_dataset(57, seed=4)
        for k in a:
            np.testing.assert_array_equal(a[k], b[k])

    def test_different_seed_differs(self):
        a = split_dataset(57, seed=4)
        b = split_dataset(57, seed=5)
        assert any(not np.array_equal(a[k], b[k]) for k in a)

    def test_accepts_bundle(self):
        bundle = _linear_bundle(n=20)
        splits = split_dataset(bundle)
        assert len(splits["train"]) == 16

    @pytest.mark.parametrize(
        "fractions", [(0.8, 0.1), (0.5, 0.2, 0.2), (0.8, 0.2, 0.0)]
    )
    def test_bad_fractions_rejected(self, fractions):
        with pytest.raises(ConfigurationError):
            split_dataset(100, fractions=fractions)

    def test_too_few_samples_rejected(self):
        with pytest.raises(ConfigurationError, match="nonempty"):
            split_dataset(5)

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(10, 400), seed=st.integers(0, 2**31 - 1))
    def test_partition_properties(self, n, seed):
        splits = split_dataset(n, seed=seed)
        all_idx = np.concatenate([splits["train"], splits["val"], splits["test"]])
        assert len(np.unique(all_idx)) == n
        assert len(splits["val"]) == math.floor(0.1 * n)
        assert len(splits["test"]) == math.floor(0.1 * n)
        assert len(splits["train"]) == n - 2 * math.floor(0.1 * n)


class TestSchedule:
    def test_step_halves_every_100(self):
        assert schedule_factor("step", 0, 500) == 1.0
        assert schedule_factor("step", 99, 500) == 1.0
        assert schedule_factor("step", 100, 500) == 0.5
        assert schedule_factor("step", 250, 500) == 0.25

    def test_one_cycle_warmup_then_cosine(self):
        total = 10
        warm = 3  # round(0.3 * 10)
        assert schedule_factor("one-cycle", 0, total) == pytest.approx(1 / 3)
        assert schedule_factor("one-cycle", warm - 1, total) == pytest.approx(1.0)
        tail = [schedule_factor("one-cycle", e, total) for e in range(warm, total)]
        assert tail[0] == pytest.approx(1.0)
        assert all(tail[i + 1] < tail[i] for i in range(len(tail) - 1))
        expected_last = 0.5 * (1 + math.cos(math.pi * (total - 1 - warm) / (total - warm)))
        assert tail[-1] == pytest.approx(expected_last)

    def test_warmup_is_monotone(self):
        ramp = [schedule_factor("one-cycle", e, 100) for e in range(30)]
        assert all(ramp[i + 1] > ramp[i] for i in range(len(ramp) - 1))


class TestTrain:
    def test_zero_epochs_returns_initialized_state(self):
        bundle = _linear_bundle()
        spec = ModelSpec.make("fnn", 4, 0)
        result = train(spec, bundle, TrainConfig(epochs=0, seeds=(5,)))
        (outcome,) = result.outcomes
        assert outcome.train_curve == ()
        assert outcome.best_epoch is None
        fresh = build_model(spec, 1, 1, bundle.grid, seed=5)
        assert param_hash(outcome.state) == param_hash(fresh)
        assert (
            evaluate(outcome.state, bundle).mean_rel_l2
            == evaluate(fresh, bundle).mean_rel_l2
        )

    def test_linear_data_converges(self):
        # the relative-L2 objective has a non-vanishing gradient at its
        # minimum, so a decaying schedule is what kills the oscillation
        bundle = _linear_bundle()
        result = train(
            ModelSpec.make("fnn", 4, 0),
            bundle,
            TrainConfig(
                learning_rate=1e-2, schedule="one-cycle", epochs=200, seeds=(0,)
            ),
        )
        (outcome,) = result.outcomes
        assert outcome.train_curve[-1] < 1e-3
        assert evaluate(outcome.state, bundle).mean_rel_l2 < 1e-3

    def test_bit_identical_repeat_runs(self):
        bundle = _linear_bundle()
        cfg = TrainConfig(learning_rate=1e-2, epochs=5, seeds=(1,))
        r1 = train(ModelSpec.make("fnn", 4, 1), bundle, cfg)
        r2 = train(ModelSpec.make("fnn", 4, 1), bundle, cfg)
        assert param_hash(r1.outcomes[0].state) == param_hash(r2.outcomes[0].state)
        assert r1.outcomes[0].train_curve == r2.outcomes[0].train_curve
        assert r1.outcomes[0].val_curve == r2.outcomes[0].val_curve

    def test_identical_seeds_give_zero_std(self):
        bundle = _linear_bundle()
        result = train(
            ModelSpec.make("fnn", 4, 1),
            bundle,
            TrainConfig(learning_rate=1e-2, epochs=3, seeds=(7, 7)),
        )
        metrics = [evaluate(o.state, bundle).mean_rel_l2 for o in result.outcomes]
        mean, std = summarize_seeds(metrics)
        assert std == 0.0
        assert mean == metrics[0]

    def test_best_validation_checkpoint_is_returned(self):
        bundle = _linear_bundle(n=30)
        result = train(
            ModelSpec.make("fnn", 4, 1),
            bundle,
            TrainConfig(learning_rate=5e-2, epochs=25, seeds=(2,)),
        )
        (outcome,) = result.outcomes
        assert outcome.val_curve[outcome.best_epoch] == min(outcome.val_curve)
        # the returned parameters reproduce that epoch's metric exactly
        stats = bundle.norm
        va = bundle.splits["val"]
        x_va = _assemble_input(
            outcome.state,
            normalize_array(bundle.inputs[va], stats.input_mean, stats.input_std),
            bundle.grid,
        ).float()
        y_va = torch.from_numpy(
            normalize_array(bundle.outputs[va], stats.output_mean, stats.output_std)
        ).float()
        recomputed = _normalized_metric(outcome.state.module, x_va, y_va)
        assert recomputed == outcome.val_curve[outcome.best_epoch]
        assert outcome.state.trained_on["best_epoch"] == outcome.best_epoch

    def test_missing_norm_or_splits_rejected(self):
        raw = dataclasses.replace(_linear_bundle(), norm=None)
        with pytest.raises(ConfigurationError, match="normalization"):
            train(ModelSpec.make("fnn", 4, 0), raw, TrainConfig(epochs=1))
        no_val = _linear_bundle()
        no_val = dataclasses.replace(
            no_val, splits={"train": no_val.splits["train"]}
        )
        with pytest.raises(ConfigurationError, match="val"):
            train(ModelSpec.make("fnn", 4, 0), no_val, TrainConfig(epochs=1))

    def test_divergence_aborts_seed_with_last_finite_epoch(self):
        # adaptive-moment updates are bounded by the learning rate, so
        # weight blow-up cannot be provoked from inside; non-finite
        # values enter through data far outside the training
        # distribution, overflowing the float32 norm at first contact
        rng = np.random.default_rng(3)
        x = rng.normal(size=(40, 16, 1))
        y = 2.0 * x + 1.0
        splits = split_dataset(40, seed=0)
        x[splits["val"]] += 1e30
        bundle = DatasetBundle(
            name="shifted-val",
            inputs=x,
            outputs=y,
            grid=GridSpec(ndim=1, shape=(16,)),
            splits=splits,
        ).with_norm_from_train()
        with pytest.raises(TrainingDivergedError) as exc:
            train(
                ModelSpec.make("fnn", 8, 2),
                bundle,
                TrainConfig(learning_rate=1e-2, epochs=3, seeds=(0,)),
            )
        # the blow-up hits the first validation pass: no epoch finished
        assert exc.value.last_finite_epoch == -1

    def test_one_diverged_seed_does_not_kill_the_ensemble(self, monkeypatch):
        import opbench.training as T

        real = T._train_one_seed

        def flaky(spec, bundle, config, seed):
            if seed == 0:
                raise TrainingDivergedError("boom", last_finite_epoch=3)
            return real(spec, bundle, config, seed)

        monkeypatch.setattr(T, "_train_one_seed", flaky)
        bundle = _linear_bundle()
        result = train(
            ModelSpec.make("fnn", 4, 0),
            bundle,
            TrainConfig(learning_rate=1e-2, epochs=2, seeds=(0, 1)),
        )
        assert result.outcomes[0].diverged
        assert result.outcomes[0].last_finite_epoch == 3
        assert not result.outcomes[1].diverged
        assert len(result.states) == 1

    def test_all_seeds_diverged_raises(self, monkeypatch):
        import opbench.training as T

        def always(spec, bundle, config, seed):
            raise TrainingDivergedError("boom", last_finite_epoch=0)

        monkeypatch.setattr(T, "_train_one_seed", always)
        with pytest.raises(TrainingDivergedError, match="every seed"):
            train(
                ModelSpec.make("fnn", 4, 0),
                _linear_bundle(),
                TrainConfig(epochs=1, seeds=(0, 1)),
            )

    def test_adversarial_family_trains(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(20, 8, 8, 1))
        bundle = DatasetBundle(
            name="tiny-2d",
            inputs=x,
            outputs=x * 0.5 + 0.1,
            grid=GridSpec(ndim=2, shape=(8, 8)),
            splits=split_dataset(20),
        ).with_norm_from_train()
        result = train(
            ModelSpec.make("cgan", 4, 1),
            bundle,
            TrainConfig(learning_rate=1e-3, epochs=2, seeds=(0,)),
        )
        (outcome,) = result.outcomes
        assert len(outcome.train_curve) == 2
        assert outcome.wall_time > 0
        assert np.isfinite(evaluate(outcome.state, bundle).mean_rel_l2)

    def test_pod_family_receives_normalized_train_outputs(self):
        bundle = _linear_bundle(n=30)
        result = train(
            ModelSpec.make("pod-deeponet", 4, 1, p=3, sensors=4),
            bundle,
            TrainConfig(learning_rate=1e-2, epochs=2, seeds=(0,)),
        )
        state = result.outcomes[0].state
        # basis columns are orthonormal over normalized train outputs
        basis = state.module.basis.numpy()
        gram = basis.T @ basis
        np.testing.assert_allclose(gram, np.eye(gram.shape[0]), atol=1e-5)

    def test_grad_clip_and_decoupled_decay_run(self):
        bundle = _linear_bundle()
        result = train(
            ModelSpec.make("fnn", 4, 1),
            bundle,
            TrainConfig(
                optimizer="adaptive-moment-decoupled-decay",
                schedule="one-cycle",
                learning_rate=1e-2,
                epochs=3,
                seeds=(0,),
                grad_clip=1.0,
            ),
        )
        assert len(result.outcomes[0].train_curve) == 3


class _TruthOracle(torch.nn.Module):
    """Returns whatever its lookup produces; probes the evaluation path
    in isolation from any real model."""

    def __init__(self, lookup):
        super().__init__()
        # evaluation reads a parameter dtype, so expose one in float64
        self._marker = torch.nn.Parameter(torch.zeros(1, dtype=torch.float64))
        self.lookup = lookup

    def forward(self, x):
        return self.lookup(x)


def _oracle_state(bundle, fn):
    state = build_model(ModelSpec.make("fnn", 4, 0), 1, 1, bundle.grid, seed=0)
    state.module = _TruthOracle(fn)
    return state


class TestEvaluate:
    def test_truth_oracle_scores_zero(self):
        bundle = _linear_bundle(n=20)
        stats = bundle.norm
        norm_out = normalize_array(
            bundle.outputs, stats.output_mean, stats.output_std
        )
        norm_in = normalize_array(bundle.inputs, stats.input_mean, stats.input_std)

        def lookup(x):
            data = x[..., 0].numpy()  # first channel, coords appended after
            for i in range(bundle.n_samples):
                if np.array_equal(data[0], norm_in[i, :, 0]):
                    return torch.from_numpy(norm_out[i][None])
            raise AssertionError("query did not match any sample")

        result = evaluate(_oracle_state(bundle, lookup), bundle)
        assert result.mean_rel_l2 < 1e-12
        assert result.n_excluded == 0

    def test_zero_predictor_scores_one(self):
        bundle = _linear_bundle(n=20)
        stats = bundle.norm
        # constant normalized output that denormalizes to zero
        pinned = -stats.output_mean / stats.output_std

        def lookup(x):
            out = np.broadcast_to(
                pinned, (x.shape[0], bundle.grid.shape[0], 1)
            ).copy()
            return torch.from_numpy(out)

        result = evaluate(_oracle_state(bundle, lookup), bundle)
        assert abs(result.mean_rel_l2 - 1.0) < 1e-12

    def test_mean_is_exactly_the_per_sample_mean(self):
        bundle = _linear_bundle(n=40)
        state = build_model(ModelSpec.make("fnn", 4, 1), 1, 1, bundle.grid, seed=0)
        result = evaluate(state, bundle)
        scores = result.per_sample
        assert np.isfinite(scores).all()
        # regrouping the same per-sample scores in any batch pattern
        # reproduces the mean (scores are defined per sample)
        by_ones = np.mean([scores[i : i + 1].mean() for i in range(len(scores))])
        assert abs(result.mean_rel_l2 - scores.mean()) < 1e-15
        assert abs(by_ones - result.mean_rel_l2) < 1e-12

    def test_split_order_does_not_change_scores(self):
        bundle = _linear_bundle(n=40)
        state = build_model(ModelSpec.make("fnn", 4, 1), 1, 1, bundle.grid, seed=0)
        forward = evaluate(state, bundle, split="test")
        shuffled = dataclasses.replace(
            bundle,
            splits={**bundle.splits, "test": bundle.splits["test"][::-1].copy()},
        )
        backward = evaluate(state, shuffled, split="test")
        np.testing.assert_array_equal(
            forward.per_sample, backward.per_sample[::-1]
        )
        assert abs(forward.mean_rel_l2 - backward.mean_rel_l2) < 1e-12

    def test_degenerate_sample_excluded_and_counted(self):
        bundle = _linear_bundle(n=20)
        outputs = bundle.outputs.copy()
        test_idx = bundle.splits["test"]
        dead = int(test_idx[0])
        outputs[dead] = 0.0
        bundle = dataclasses.replace(bundle, outputs=outputs)
        bundle = bundle.with_norm_from_train()
        state = build_model(ModelSpec.make("fnn", 4, 1), 1, 1, bundle.grid, seed=0)
        result = evaluate(state, bundle, split="test")
        assert result.excluded == (dead,)
        assert result.n_excluded == 1
        assert np.isnan(result.per_sample[0])
        assert np.isfinite(result.mean_rel_l2)

    def test_every_sample_degenerate_raises(self):
        bundle = _linear_bundle(n=20)
        outputs = bundle.outputs.copy()
        outputs[bundle.splits["test"]] = 0.0
        bundle = dataclasses.replace(bundle, outputs=outputs).with_norm_from_train()
        state = build_model(ModelSpec.make("fnn", 4, 1), 1, 1, bundle.grid, seed=0)
        with pytest.raises(DegenerateReferenceError):
            evaluate(state, bundle, split="test")

    def test_unknown_split_rejected(self):
        bundle = _linear_bundle()
        state = build_model(ModelSpec.make("fnn", 4, 0), 1, 1, bundle.grid, seed=0)
        with pytest.raises(ConfigurationError, match="holdout"):
            evaluate(state, bundle, split="holdout")


class TestSummarize:
    def test_mean_and_std(self):
        mean, std = summarize_seeds([1.0, 2.0, 3.0])
        assert mean == 2.0
        assert std == pytest.approx(math.sqrt(2 / 3))

    def test_empty_rejected(self):
        with pytest.raises(ConfigurationError):
            summarize_seeds([])
