"""Command line behavior and end-to-end determinism.

Training budgets here are tiny; the point is the plumbing, not the
models: configs parse, datasets cache, records append exactly once,
reruns are byte-identical, and the report command never recomputes.
"""
import pytest
from click.testing import CliRunner

from opbench.cli import main
from opbench.config import suite_from_dict
from opbench.pipeline import ensure_bundle, run_suite
from opbench.store import ResultStore

SUITE = """
datasets:
  - name: burgers
    count: 16
    solver: {resolution: 16, nu: 0.05}
models:
  - {family: fnn, width: 8, depth: 1}
train:
  epochs: 2
  batch_size: 8
  seeds: [0, 1]
tasks:
  - accuracy
master_seed: 3
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def suite_file(tmp_path):
    path = tmp_path / "suite.yaml"
    path.write_text(SUITE)
    return str(path)


class TestGenerate:
    def test_reports_identical_checksums_for_identical_seeds(
        self, runner, suite_file, tmp_path
    ):
        first = runner.invoke(
            main, ["generate", "--config", suite_file, "--out", str(tmp_path / "a")]
        )
        second = runner.invoke(
            main, ["generate", "--config", suite_file, "--out", str(tmp_path / "b")]
        )
        assert first.exit_code == 0, first.output
        assert second.exit_code == 0
        assert first.output == second.output
        assert "burgers: 16 samples at 16, checksum" in first.output

    def test_seed_override_changes_data(self, runner, suite_file, tmp_path):
        base = runner.invoke(
            main, ["generate", "--config", suite_file, "--out", str(tmp_path / "a")]
        )
        bumped = runner.invoke(
            main,
            [
                "generate",
                "--config",
                suite_file,
                "--out",
                str(tmp_path / "b"),
                "--seed",
                "4",
            ],
        )
        assert base.output != bumped.output

    def test_missing_out_dir(self, runner, suite_file):
        result = runner.invoke(main, ["generate", "--config", suite_file])
        assert result.exit_code == 2
        assert "output directory" in result.output


class TestBenchmark:
    def test_records_report_and_idempotence(self, runner, suite_file, tmp_path):
        out = str(tmp_path / "run")
        result = runner.invoke(
            main, ["benchmark", "--config", suite_file, "--out", out]
        )
        assert result.exit_code == 0, result.output
        assert "2 records (2 new, 0 duplicate, 0 failed)" in result.output
        store = ResultStore(out)
        assert len(store) == 2
        assert (store.root / "report.txt").read_text().count("## accuracy") == 1
        # rerunning the same config appends nothing
        again = runner.invoke(
            main, ["benchmark", "--config", suite_file, "--out", out]
        )
        assert "2 records (0 new, 2 duplicate, 0 failed)" in again.output
        assert len(ResultStore(out)) == 2

    def test_two_runs_are_byte_identical(self, runner, suite_file, tmp_path):
        for sub in ("a", "b"):
            result = runner.invoke(
                main,
                ["benchmark", "--config", suite_file, "--out", str(tmp_path / sub)],
            )
            assert result.exit_code == 0, result.output
        log_a = ResultStore(tmp_path / "a").log_bytes()
        log_b = ResultStore(tmp_path / "b").log_bytes()
        assert log_a == log_b
        assert len(log_a) > 0
        report_a = (tmp_path / "a" / "report.txt").read_bytes()
        report_b = (tmp_path / "b" / "report.txt").read_bytes()
        assert report_a == report_b

    def test_empty_task_list_writes_config_echo(self, runner, tmp_path):
        config = tmp_path / "empty.yaml"
        config.write_text(SUITE.replace("tasks:\n  - accuracy\n", ""))
        out = str(tmp_path / "run")
        result = runner.invoke(
            main, ["benchmark", "--config", str(config), "--out", out]
        )
        assert result.exit_code == 0, result.output
        text = (tmp_path / "run" / "report.txt").read_text()
        assert "warning: no records matched" in text
        assert '"master_seed":3' in text

    def test_seed_override_changes_records(self, runner, suite_file, tmp_path):
        runner.invoke(
            main,
            ["benchmark", "--config", suite_file, "--out", str(tmp_path / "a")],
        )
        runner.invoke(
            main,
            [
                "benchmark",
                "--config",
                suite_file,
                "--out",
                str(tmp_path / "b"),
                "--seed",
                "9",
            ],
        )
        a = ResultStore(tmp_path / "a").records()[0]
        b = ResultStore(tmp_path / "b").records()[0]
        assert a.config_hash != b.config_hash
        assert a.rel_l2_mean != b.rel_l2_mean


class TestReport:
    @pytest.fixture
    def populated(self, runner, suite_file, tmp_path):
        out = str(tmp_path / "run")
        result = runner.invoke(
            main, ["benchmark", "--config", suite_file, "--out", out]
        )
        assert result.exit_code == 0, result.output
        return out

    def test_renders_without_recompute(self, runner, populated):
        before = ResultStore(populated).log_bytes()
        result = runner.invoke(main, ["report", "--out", populated])
        assert result.exit_code == 0
        assert "## accuracy" in result.output
        assert ResultStore(populated).log_bytes() == before

    def test_byte_identical_renders(self, runner, populated):
        first = runner.invoke(main, ["report", "--out", populated])
        second = runner.invoke(main, ["report", "--out", populated])
        assert first.output == second.output

    def test_filter(self, runner, populated):
        result = runner.invoke(
            main, ["report", "--out", populated, "--filter", "seed=0"]
        )
        assert result.exit_code == 0
        assert "records: 1" in result.output

    def test_unknown_filter_key_is_usage_error(self, runner, populated):
        result = runner.invoke(
            main, ["report", "--out", populated, "--filter", "flavor=x"]
        )
        assert result.exit_code == 2
        assert "unknown filter key 'flavor'" in result.output

    def test_malformed_filter(self, runner, populated):
        result = runner.invoke(
            main, ["report", "--out", populated, "--filter", "task"]
        )
        assert result.exit_code == 2
        assert "KEY=VALUE" in result.output

    def test_non_integer_seed_filter(self, runner, populated):
        result = runner.invoke(
            main, ["report", "--out", populated, "--filter", "seed=zero"]
        )
        assert result.exit_code == 2

    def test_filter_to_empty_succeeds_with_warning(self, runner, populated):
        result = runner.invoke(
            main,
            ["report", "--out", populated, "--filter", "dataset=darcy"],
        )
        assert result.exit_code == 0
        assert "warning: no records matched" in result.output


class TestValidateCommand:
    def test_all_checks_pass(self, runner):
        result = runner.invoke(main, ["validate"])
        assert result.exit_code == 0, result.output
        lines = [l for l in result.output.splitlines() if l.startswith("PASS")]
        assert len(lines) == 11
        assert "11/11 checks passed" in result.output


class TestPipeline:
    def _config(self, out_dir):
        return suite_from_dict(
            {
                "datasets": [
                    {
                        "name": "burgers",
                        "count": 16,
                        "solver": {"resolution": 16, "nu": 0.05},
                    }
                ],
                "models": [{"family": "fnn", "width": 8, "depth": 1}],
                "train": {"epochs": 2, "batch_size": 8, "seeds": [0]},
                "tasks": ["accuracy"],
                "master_seed": 3,
                "out_dir": str(out_dir),
            }
        )

    def test_dataset_cache_hit(self, tmp_path):
        config = self._config(tmp_path)
        store = ResultStore(tmp_path)
        first = ensure_bundle(store, config.datasets[0], config)
        manifest = store.dataset_dir / "burgers" / "manifest.json"
        stamp = manifest.stat().st_mtime_ns
        second = ensure_bundle(store, config.datasets[0], config)
        assert manifest.stat().st_mtime_ns == stamp  # untouched: cache hit
        assert (first.inputs == second.inputs).all()

    def test_cache_invalidated_by_seed_change(self, tmp_path):
        config = self._config(tmp_path)
        store = ResultStore(tmp_path)
        first = ensure_bundle(store, config.datasets[0], config)
        moved = config.with_overrides(master_seed=4)
        rebuilt = ensure_bundle(store, moved.datasets[0], moved)
        assert not (first.inputs == rebuilt.inputs).all()

    def test_run_suite_appends_once(self, tmp_path):
        config = self._config(tmp_path)
        store = ResultStore(tmp_path)
        records, added, skipped = run_suite(config, store)
        assert (len(records), added, skipped) == (1, 1, 0)
        records, added, skipped = run_suite(config, store)
        assert (len(records), added, skipped) == (1, 0, 1)
