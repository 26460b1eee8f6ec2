"""Delimited report emission and sweep figures.

Figures go through the Agg backend so experiment runs work headless; every
sweep gets a PNG rendered next to its CSV.
"""

from __future__ import annotations

import csv
import json
import math
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _jsonable(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_results_csv(path: str, rows: Sequence[dict]) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="", encoding="utf8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def write_summary_json(path: str, summary: dict) -> None:
    with open(path, "w", encoding="utf8") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def render_sweep_figure(path: str, param: str, values: Sequence[float],
                        acc: Sequence[float], hit: Sequence[float]) -> None:
    """Accuracy (left axis, %) and hit rate (right axis) against one knob."""
    fig, ax_acc = plt.subplots(figsize=(5.0, 3.2))
    ax_hit = ax_acc.twinx()
    ax_acc.plot(values, acc, marker="o", color="tab:blue", label="accuracy (%)")
    ax_hit.plot(values, [100.0 * h for h in hit], marker="s", linestyle="--",
                color="tab:orange", label="hit rate (%)")
    ax_acc.set_xlabel(param)
    ax_acc.set_ylabel("accuracy (%)", color="tab:blue")
    ax_hit.set_ylabel("hit rate (%)", color="tab:orange")
    ax_acc.grid(True, alpha=0.3)
    lines = ax_acc.get_lines() + ax_hit.get_lines()
    ax_acc.legend(lines, [ln.get_label() for ln in lines], loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_training_curve(path: str, loss_total: Sequence[float],
                          loss_distance: Sequence[float], loss_hop: Sequence[float]) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    epochs = range(len(loss_total))
    ax.plot(epochs, loss_total, label="total")
    ax.plot(epochs, loss_distance, label="distance", alpha=0.7)
    ax.plot(epochs, loss_hop, label="hop", alpha=0.7)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss (normalized targets)")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
