"""Static figures regenerated from the CSV artifacts.

Per evaluated scenario: squared tracking error against step, and the
cumulative state / parameter stability percentages against step, one line
per controller averaged over episodes.  For a training directory, the
optimizer history.
"""

from __future__ import annotations

import csv
import logging
import re
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

_TRACE_RE = re.compile(r"trace_(?P<controller>[a-z_]+)_(?P<scenario>[a-z-]+)_ep(?P<ep>\d+)\.csv")

_LABELS = {"lb_pid": "learned PID", "naive_pid": "naive PID"}


def _read_csv(path: Path) -> dict[str, np.ndarray]:
    with path.open() as fh:
        reader = csv.DictReader(fh)
        columns = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name, value in row.items():
                columns[name].append(value)
    out = {}
    for name, values in columns.items():
        try:
            out[name] = np.array([float(v) for v in values])
        except ValueError:
            out[name] = np.array(values)
    return out


def _mean_over_episodes(traces: list[dict[str, np.ndarray]],
                        column: str) -> np.ndarray:
    """Mean of a column across traces, truncated to the shortest trace."""
    n = min(len(t[column]) for t in traces)
    return np.mean([t[column][:n] for t in traces], axis=0)


def plot_eval_dir(in_dir: str | Path, out_dir: str | Path) -> list[Path]:
    """Build the per-scenario figures from trace CSVs; returns the files."""
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups: dict[str, dict[str, list[dict]]] = defaultdict(lambda: defaultdict(list))
    for path in sorted(in_dir.glob("trace_*.csv")):
        m = _TRACE_RE.match(path.name)
        if not m:
            continue
        trace = _read_csv(path)
        if len(trace["step"]) >= 2:
            groups[m["scenario"]][m["controller"]].append(trace)

    written = []
    for scenario, by_controller in sorted(groups.items()):
        for column, ylabel, stem, logy in (
                ("cost", "mean squared pose error", "mse", True),
                ("cum_state_pct", "state stability [%]", "state_stability", False),
                ("cum_param_pct", "parameter stability [%]", "param_stability", False)):
            fig, ax = plt.subplots(figsize=(7, 4))
            for controller, traces in sorted(by_controller.items()):
                curve = _mean_over_episodes(traces, column)
                steps = np.arange(1, len(curve) + 1)
                ax.plot(steps, curve, label=_LABELS.get(controller, controller))
            if logy:
                ax.set_yscale("log")
            ax.set_xlabel("step")
            ax.set_ylabel(ylabel)
            ax.set_title(f"{ylabel}, scenario: {scenario}")
            ax.grid(True, alpha=0.4)
            ax.legend()
            target = out_dir / f"{stem}_{scenario}.png"
            fig.savefig(target, dpi=120, bbox_inches="tight")
            plt.close(fig)
            written.append(target)
    if not written:
        logger.warning("no usable trace CSVs found in %s", in_dir)
    return written


def plot_history(in_dir: str | Path, out_dir: str | Path) -> Path | None:
    """Optimizer cost curves from history.csv, if present."""
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    history = in_dir / "history.csv"
    if not history.exists():
        return None
    data = _read_csv(history)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(data["epoch"], data["mean_cost"], label="population mean")
    ax.plot(data["epoch"], data["elite_mean_cost"], label="elite mean")
    ax.plot(data["epoch"], data["best_cost"], label="best so far")
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("episode cost")
    ax.grid(True, alpha=0.4)
    ax.legend()
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / "training_history.png"
    fig.savefig(target, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return target


def plot_all(in_dir: str | Path, out_dir: str | Path) -> list[Path]:
    written = plot_eval_dir(in_dir, out_dir)
    history = plot_history(in_dir, out_dir)
    if history is not None:
        written.append(history)
    return written
