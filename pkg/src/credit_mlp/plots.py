"""SVG figures for the CLI. Every figure is written next to a CSV of its data."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp, so identical data gives identical bytes
matplotlib.rcParams["svg.hashsalt"] = "credit-mlp"
matplotlib.rcParams["svg.fonttype"] = "none"


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def sweep_plot(widths: Sequence[int], accuracy: dict[str, Sequence[float]], rms: dict[str, Sequence[float]], path) -> None:
    fig, ax_acc = plt.subplots(figsize=(6, 4))
    ax_rms = ax_acc.twinx()
    for head, style in (("classification", "-"), ("regression", "--")):
        ax_acc.plot(widths, accuracy[head], "o" + style, color="tab:blue", label=f"{head} accuracy")
        ax_rms.plot(widths, rms[head], "s" + style, color="tab:red", label=f"{head} RMS")
    ax_acc.set_xlabel("nodes per hidden layer")
    ax_acc.set_ylabel("test accuracy", color="tab:blue")
    ax_rms.set_ylabel("test RMS (notches)", color="tab:red")
    if len(widths) > 1 and min(widths) > 0:
        ax_acc.set_xscale("log")
    lines = ax_acc.get_lines() + ax_rms.get_lines()
    ax_acc.legend(lines, [ln.get_label() for ln in lines], fontsize=7, loc="best")
    fig.tight_layout()
    _save(fig, path)


def confusion_plot(confusion: np.ndarray, labels: Sequence[str], title: str, path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.imshow(confusion, cmap="Blues")
    for (i, j), count in np.ndenumerate(confusion):
        ax.text(j, i, str(int(count)), ha="center", va="center", fontsize=8)
    ax.set_xticks(range(len(labels)), labels)
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def trend_plot(series: dict[str, list[tuple[int, float]]], yearly_mean: dict[int, float], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for company, pts in series.items():
        pts = sorted(pts)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "-", alpha=0.5, label=company)
    if yearly_mean:
        ax.plot(list(yearly_mean), list(yearly_mean.values()), "k-o", linewidth=2, label="cohort mean")
    ax.set_xlabel("fiscal year")
    ax.set_ylabel("predicted score (higher = riskier)")
    ax.legend(fontsize=6, loc="best")
    fig.tight_layout()
    _save(fig, path)


def scatter_plot(model_scores: Sequence[float], external: Sequence[float], external_label: str, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(model_scores, external, s=14)
    ax.set_xlabel("model score (higher = riskier)")
    ax.set_ylabel(external_label)
    fig.tight_layout()
    _save(fig, path)
