"""Command line entry point.

Commands: generate, train, benchmark, report, validate.  The first
three are config-driven; report renders an existing store without
recomputing anything; validate runs the oracle battery.
"""
from __future__ import annotations

import dataclasses
import hashlib
import sys

import click

from .config import SuiteConfig, load_suite
from .container import canonical_json, container_checksums
from .errors import BenchmarkError
from .models import save_checkpoint
from .pipeline import ensure_bundle, run_suite
from .report import render_report
from .store import FILTER_KEYS, ResultStore
from .tasks import Harness, model_label
from .validation import run_validation


def _load(config_path, seed, deterministic, out) -> SuiteConfig:
    try:
        config = load_suite(config_path)
        return config.with_overrides(
            master_seed=seed, deterministic=deterministic, out_dir=out
        )
    except BenchmarkError as err:
        raise click.ClickException(str(err)) from None


def _store_for(config: SuiteConfig) -> ResultStore:
    if not config.out_dir:
        raise click.UsageError(
            "an output directory is required (--out or out_dir in the config)"
        )
    return ResultStore(config.out_dir)


_config_opt = click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Suite file (YAML or JSON).",
)
_seed_opt = click.option(
    "--seed", type=int, default=None, help="Override the master seed."
)
_det_opt = click.option(
    "--deterministic/--no-deterministic",
    "deterministic",
    default=None,
    help="Override the config's deterministic flag.",
)
_out_opt = click.option(
    "--out", type=click.Path(file_okay=False), default=None,
    help="Output directory (overrides the config's out_dir).",
)


@click.group()
@click.version_option(package_name="opbench")
def main():
    """Benchmark suite for data-driven PDE solvers."""


@main.command()
@_config_opt
@_seed_opt
@_det_opt
@_out_opt
def generate(config_path, seed, deterministic, out):
    """Build every configured dataset into the store's cache."""
    config = _load(config_path, seed, deterministic, out)
    store = _store_for(config)
    for ds in config.datasets:
        try:
            bundle = ensure_bundle(store, ds, config, rebuild=True)
        except BenchmarkError as err:
            raise click.ClickException(f"{ds.name}: {err}") from None
        sums = container_checksums(store.dataset_dir / bundle.name)
        digest = hashlib.sha256(
            canonical_json(sums).encode()
        ).hexdigest()[:16]
        click.echo(
            f"{bundle.name}: {bundle.n_samples} samples at "
            f"{'x'.join(str(s) for s in bundle.grid.shape)}, "
            f"checksum {digest}"
        )


@main.command()
@_config_opt
@_seed_opt
@_det_opt
@_out_opt
def train(config_path, seed, deterministic, out):
    """Train every (model, dataset, seed) and save checkpoints."""
    config = _load(config_path, seed, deterministic, out)
    store = _store_for(config)
    train_cfg = dataclasses.replace(
        config.train, deterministic=config.deterministic
    )
    harness = Harness(
        train_cfg,
        config_hash=config.config_hash(),
        deterministic=config.deterministic,
    )
    for ds in config.datasets:
        try:
            bundle = ensure_bundle(store, ds, config)
        except BenchmarkError as err:
            raise click.ClickException(f"{ds.name}: {err}") from None
        for spec in config.models:
            for s in config.train.seeds:
                label = model_label(spec)
                try:
                    state, wall = harness.trained_state(spec, bundle, s)
                except BenchmarkError as err:
                    click.echo(
                        f"{label} on {ds.name} seed {s}: FAILED ({err})",
                        err=True,
                    )
                    continue
                path = store.checkpoint_dir / f"{label}__{ds.name}__s{s}"
                save_checkpoint(state, path)
                click.echo(
                    f"{label} on {ds.name} seed {s}: "
                    f"best epoch {state.trained_on['best_epoch']}, "
                    f"checkpoint {path.name}"
                )


@main.command()
@_config_opt
@_seed_opt
@_det_opt
@_out_opt
def benchmark(config_path, seed, deterministic, out):
    """Run the configured task list and write records plus a report."""
    config = _load(config_path, seed, deterministic, out)
    store = _store_for(config)
    try:
        records, added, skipped = run_suite(config, store)
    except BenchmarkError as err:
        raise click.ClickException(str(err)) from None
    text = render_report(
        store.records(config=config.config_hash()),
        config_echo=config.canonical(),
        plot_dir=store.root / "plots",
    )
    report_path = store.root / "report.txt"
    report_path.write_text(text)
    n_failed = sum(1 for r in records if r.failed)
    click.echo(
        f"{len(records)} records ({added} new, {skipped} duplicate, "
        f"{n_failed} failed) -> {report_path}"
    )


@main.command()
@_out_opt
@click.option(
    "--filter",
    "filters",
    multiple=True,
    metavar="KEY=VALUE",
    help=f"Restrict records; keys: {', '.join(FILTER_KEYS)}.",
)
def report(out, filters):
    """Render the records already in a store; computes nothing."""
    if not out:
        raise click.UsageError("--out must point at a results directory")
    parsed = {}
    for item in filters:
        if "=" not in item:
            raise click.UsageError(
                f"filters take the form KEY=VALUE, got '{item}'"
            )
        key, value = item.split("=", 1)
        if key not in FILTER_KEYS:
            raise click.UsageError(
                f"unknown filter key '{key}'; allowed: {', '.join(FILTER_KEYS)}"
            )
        if key == "seed":
            try:
                value = int(value)
            except ValueError:
                raise click.UsageError(
                    f"seed filter needs an integer, got '{value}'"
                ) from None
        parsed[key] = value
    store = ResultStore(out)
    records = store.records(**parsed)
    click.echo(render_report(records, filters=parsed or None))
    if not records:
        click.echo("warning: no records matched the filters", err=True)


@main.command()
def validate():
    """Run the oracle battery; nonzero exit if anything fails."""
    results = run_validation()
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        click.echo(f"{status}  {r.name:<24} ({r.seconds:6.2f}s)  {r.detail}")
        failed += 0 if r.passed else 1
    click.echo(f"{len(results) - failed}/{len(results)} checks passed")
    if failed:
        sys.exit(1)


if __name__ == "__main__":
    main()
