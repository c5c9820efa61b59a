"""Render stored records into tables and plots.

Rendering is a pure function of the records: the same store produces
byte-identical text.  Error cells show 1e-2 units as "1.08±0.06"
(mean and deviation across seed replicates); the best three entries of
every column carry [1]/[2]/[3] markers; cells whose replicates partly
failed keep the surviving mean and gain a '!' marker, and fully failed
cells say so instead of aborting the render.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure

from .tasks import TASKS, ExperimentRecord
from .training import summarize_seeds

_SVG_SALT = {"svg.hashsalt": "opbench"}  # keeps SVG output reproducible


def format_mean_std(mean: float, std: float) -> str:
    """Error pair in 1e-2 units: (0.0108, 0.0006) -> '1.08±0.06'."""
    return f"{100 * mean:.2f}±{100 * std:.2f}"


def format_seconds(mean: float, std: float) -> str:
    return f"{mean:.3g}±{std:.2g}"


@dataclass
class Cell:
    """Cross-seed aggregate of one (model, dataset, task, parameter)."""

    mean: float | None
    std: float | None
    n_seeds: int
    n_failed: int
    flagged: bool

    @property
    def failed(self) -> bool:
        return self.mean is None


def aggregate(records) -> dict[tuple, Cell]:
    """Group per-seed records and summarize across seeds."""
    groups: dict[tuple, list[ExperimentRecord]] = {}
    for r in records:
        groups.setdefault((r.model, r.dataset, r.task, r.parameter), []).append(r)
    cells = {}
    for key, group in groups.items():
        values = [r.rel_l2_mean for r in group if not r.failed]
        n_failed = sum(1 for r in group if r.failed)
        flagged = n_failed > 0 or any(r.flags for r in group)
        if values:
            mean, std = summarize_seeds(values)
            cells[key] = Cell(mean, std, len(group), n_failed, flagged)
        else:
            cells[key] = Cell(None, None, len(group), n_failed, True)
    return cells


def _param_order(value: str):
    if "=" in value:
        tail = value.split("=", 1)[1]
        try:
            return (0, float(tail), value)
        except ValueError:
            pass
    return (1, 0.0, value)


def _rank_markers(column: dict[str, Cell]) -> dict[str, str]:
    """[1]/[2]/[3] for the three smallest means in one column."""
    ranked = sorted(
        (label for label, cell in column.items() if not cell.failed),
        key=lambda label: column[label].mean,
    )
    return {label: f" [{i + 1}]" for i, label in enumerate(ranked[:3])}


def _layout(headers: list[str], rows: list[list[str]]) -> str:
    widths = [
        max(len(headers[j]), *(len(row[j]) for row in rows)) if rows else len(headers[j])
        for j in range(len(headers))
    ]
    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines)


def _cell_text(cell: Cell | None, marker: str = "", seconds: bool = False) -> str:
    if cell is None:
        return "-"
    if cell.failed:
        return f"failed({cell.n_failed}/{cell.n_seeds})"
    fmt = format_seconds if seconds else format_mean_std
    text = fmt(cell.mean, cell.std) + marker
    if cell.flagged:
        text += " !"
    return text


def _table(cells: dict[tuple, Cell], columns: list[str], column_of, label_of) -> str:
    """Generic model-rows table; columns ranked independently."""
    models = sorted({key[0] for key in cells})
    grid: dict[str, dict[str, Cell]] = {c: {} for c in columns}
    for key, cell in cells.items():
        col = column_of(key)
        if col in grid:
            grid[col][key[0]] = cell
    markers = {c: _rank_markers(grid[c]) for c in columns}
    rows = []
    for model in models:
        row = [model]
        for c in columns:
            cell = grid[c].get(model)
            row.append(_cell_text(cell, markers[c].get(model, "")))
        rows.append(row)
    return _layout(["model"] + [label_of(c) for c in columns], rows)


def _section(title: str, body: str) -> str:
    return f"## {title}\n\n{body}\n"


def _accuracy_section(records) -> str:
    cells = aggregate(records)
    datasets = sorted({key[1] for key in cells})
    body = _table(
        cells, datasets, column_of=lambda k: k[1], label_of=lambda c: c
    )
    return _section("accuracy (1e-2 relative L2, mean±std over seeds)", body)


def _parameter_section(records, task: str, title: str) -> str:
    cells = aggregate(records)
    datasets = sorted({key[1] for key in cells})
    blocks = []
    for dataset in datasets:
        sub = {k: v for k, v in cells.items() if k[1] == dataset}
        params = sorted({k[3] for k in sub}, key=_param_order)
        table = _table(
            sub, params, column_of=lambda k: k[3], label_of=lambda c: c
        )
        blocks.append(f"dataset: {dataset}\n{table}")
    return _section(title, "\n\n".join(blocks))


def _ood_section(records) -> str:
    cells = aggregate(records)
    pairs = sorted(
        {tuple(p.split("=")[1] for p in key[3].split(",")) for key in cells}
    )
    test_names = sorted({p[1] for p in pairs})
    models = sorted({key[0] for key in cells})
    rows = []
    for model in models:
        for train_name in sorted({p[0] for p in pairs}):
            row = [model, train_name]
            for test_name in test_names:
                parameter = f"train={train_name},test={test_name}"
                cell = cells.get((model, train_name, "ood-swap", parameter))
                row.append(_cell_text(cell))
            rows.append(row)
    body = _layout(
        ["model", "train\\test"] + test_names,
        rows,
    )
    return _section("ood-swap (1e-2 relative L2, rows train, columns test)", body)


def _timing_section(records) -> str:
    groups: dict[tuple, list[ExperimentRecord]] = {}
    for r in records:
        groups.setdefault((r.model, r.dataset, r.parameter), []).append(r)
    models = sorted({k[0] for k in groups})
    rows = []
    infer_means = {}
    for (model, dataset, parameter), group in sorted(groups.items()):
        alive = [r for r in group if not r.failed]
        if not alive:
            rows.append([model, dataset, parameter, "failed", "failed"])
            continue
        t_mean, t_std = summarize_seeds([r.train_seconds for r in alive])
        i_mean, i_std = summarize_seeds([r.inference_seconds for r in alive])
        infer_means[(model, dataset, parameter)] = i_mean
        rows.append(
            [
                model,
                dataset,
                parameter,
                format_seconds(t_mean, t_std),
                format_seconds(i_mean, i_std),
            ]
        )
    order = sorted(infer_means, key=infer_means.get)[:3]
    marker = {key: f" [{i + 1}]" for i, key in enumerate(order)}
    for row in rows:
        key = (row[0], row[1], row[2])
        if key in marker:
            row[4] += marker[key]
    body = _layout(
        ["model", "dataset", "parameter", "train_s", "inference_s"], rows
    )
    return _section("timing (seconds, mean±std over seeds)", body)


_SECTION_BUILDERS = {
    "accuracy": _accuracy_section,
    "noise": lambda r: _parameter_section(
        r, "noise", "noise robustness (1e-2 relative L2 vs corruption level)"
    ),
    "data-efficiency": lambda r: _parameter_section(
        r, "data-efficiency", "data efficiency (1e-2 relative L2 vs train fraction)"
    ),
    "super-resolution": lambda r: _parameter_section(
        r,
        "super-resolution",
        "zero-shot super-resolution (1e-2 relative L2 vs test resolution)",
    ),
    "ood-swap": _ood_section,
    "timing": _timing_section,
}


def render_report(
    records,
    config_echo: str | None = None,
    filters: dict | None = None,
    plot_dir: str | Path | None = None,
) -> str:
    """The full text report for a set of records."""
    lines = ["benchmark report", "================", ""]
    if filters:
        lines.append(
            "filters: "
            + " ".join(f"{k}={v}" for k, v in sorted(filters.items()))
        )
    hashes = sorted({r.config_hash for r in records})
    lines.append(f"records: {len(records)}")
    if hashes:
        lines.append("config hashes: " + ", ".join(hashes))
    lines.append("")
    if not records:
        lines.append("warning: no records matched")
        lines.append("")
    plot_files = []
    if plot_dir is not None and records:
        plot_files = write_plots(records, plot_dir)
    for task in TASKS:
        task_records = [r for r in records if r.task == task]
        if task_records:
            lines.append(_SECTION_BUILDERS[task](task_records))
    if plot_files:
        lines.append("plots:")
        lines.extend(f"  {name}" for name in plot_files)
        lines.append("")
    if config_echo is not None:
        lines.append("config:")
        lines.append(config_echo)
        lines.append("")
    return "\n".join(lines)


# -- plots ---------------------------------------------------------------


def _save(fig: Figure, path: Path) -> None:
    with matplotlib.rc_context(_SVG_SALT):
        fig.savefig(path, format="svg", metadata={"Date": None})


def write_plots(records, plot_dir: str | Path) -> list[str]:
    """Noise curves and timing bars, one SVG per dataset; returns the
    file names written (deterministic content for identical records)."""
    plot_dir = Path(plot_dir)
    written = []
    noise = [r for r in records if r.task == "noise" and not r.failed]
    for dataset in sorted({r.dataset for r in noise}):
        path = plot_dir / f"noise-{dataset}.svg"
        _plot_noise([r for r in noise if r.dataset == dataset], path)
        written.append(path.name)
    timing = [r for r in records if r.task == "timing" and not r.failed]
    for dataset in sorted({r.dataset for r in timing}):
        path = plot_dir / f"timing-{dataset}.svg"
        _plot_timing([r for r in timing if r.dataset == dataset], path)
        written.append(path.name)
    return written


def _plot_noise(records, path: Path) -> None:
    cells = aggregate(records)
    models = sorted({key[0] for key in cells})
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot(111)
    for model in models:
        points = sorted(
            (
                (float(key[3].split("=")[1]), cell.mean, cell.std)
                for key, cell in cells.items()
                if key[0] == model and not cell.failed
            )
        )
        if not points:
            continue
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        es = [p[2] for p in points]
        ax.errorbar(xs, ys, yerr=es, marker="o", label=model, capsize=2)
    ax.set_xlabel("corruption level")
    ax.set_ylabel("relative L2")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    ax.set_title(f"noise robustness: {records[0].dataset}")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    _save(fig, path)


def _plot_timing(records, path: Path) -> None:
    groups: dict[str, list[ExperimentRecord]] = {}
    for r in records:
        groups.setdefault(r.model, []).append(r)
    models = sorted(groups)
    train = [
        summarize_seeds([r.train_seconds for r in groups[m]])[0] for m in models
    ]
    infer = [
        summarize_seeds([r.inference_seconds for r in groups[m]])[0]
        for m in models
    ]
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot(111)
    xs = range(len(models))
    ax.bar([x - 0.2 for x in xs], train, width=0.4, label="train")
    ax.bar([x + 0.2 for x in xs], infer, width=0.4, label="inference")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(models, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("seconds")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    ax.set_title(f"timing: {records[0].dataset}")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    _save(fig, path)
