"""Delimited-table and figure output, byte-deterministic for fixed config + seed."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # headless, and a stable SVG backend for byte-identical output
import matplotlib.pyplot as plt

from . import __version__
from .config import ExperimentConfig, config_to_dict


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def write_table(path: Path, columns: list[str], rows, config: ExperimentConfig | None,
                extra_comments: list[str] | None = None) -> Path:
    """CSV with a '#' comment block recording the generator version and config."""
    path = Path(path)
    lines = [f"# singletsim {__version__}"]
    if config is not None:
        lines.append("# config: " + json.dumps(config_to_dict(config), sort_keys=True))
    for comment in extra_comments or []:
        lines.append(f"# {comment}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in lines:
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_table(path: Path) -> tuple[list[str], list[list[str]], list[str]]:
    """Inverse of write_table: (columns, rows, comments)."""
    comments, data = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line[1:].strip())
            else:
                data.append(line)
    rows = list(csv.reader(data))
    return rows[0], rows[1:], comments


_TRACE_STYLE = {
    # label -> (color, linestyle)
    "mixed lossless": ("tab:blue", "-"),
    "product up/down lossless": ("tab:green", "--"),
}


def render_figure(path: Path, traces: dict[str, tuple], dots: tuple | None = None,
                  title: str = "Squeezing dynamics",
                  xlabel: str = r"$t/\tau$ (cumulative)",
                  ylabel: str = r"$\xi_s^2$",
                  dots_label: str = "exact model") -> Path:
    """Overlay (x, y) traces into a self-contained SVG.

    traces maps label -> (x array, y array); dots is an optional scatter
    trace (by default the exact-model points of the dynamics figure).
    """
    plt.rcParams["svg.hashsalt"] = "singletsim"
    plt.rcParams["svg.fonttype"] = "none"  # keep labels as text so output diffs cleanly
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, (t, xi) in traces.items():
        color, style = _TRACE_STYLE.get(label, (None, "-"))
        ax.plot(t, xi, style, color=color, label=label, linewidth=1.4)
    if dots is not None:
        t, xi = dots
        ax.plot(t, xi, "o", color="black", markersize=3.5, linestyle="none",
                label=dots_label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)
