"""Render report figures to files (Agg backend, pinned metadata so identical
runs produce identical bytes)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

SAVEFIG_KW = dict(dpi=120, metadata={"Software": "camoseg"})
METRIC_LABELS = {
    "iou": "mIoU",
    "dice": "mDice",
    "mae": "MAE",
    "s_measure": "S-measure",
    "e_measure": "E-measure",
    "weighted_f": "weighted F",
}


def sweep_curves(
    thresholds: list[float],
    series: dict[str, list[float]],
    path: str | Path,
) -> Path:
    """Metric-vs-threshold curves for a sweep (single points degrade fine)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for metric, values in series.items():
        ax.plot(thresholds, values, marker="o", label=METRIC_LABELS.get(metric, metric))
    ax.set_xlabel("detector threshold")
    ax.set_ylabel("dataset score")
    ax.set_title("threshold sweep")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, **SAVEFIG_KW)
    plt.close(fig)
    return path


def per_video_bars(
    values: dict[str, float], path: str | Path, title: str = "per-video mIoU"
) -> Path:
    """Horizontal bars, one per video, sorted by name."""
    names = sorted(values)
    scores = [values[n] for n in names]
    fig, ax = plt.subplots(figsize=(6.0, max(2.0, 0.3 * len(names) + 1.0)))
    ax.barh(range(len(names)), scores, color="#4878a8")
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlim(0.0, 1.0)
    ax.set_xlabel("mIoU")
    ax.set_title(title)
    ax.grid(True, axis="x", alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, **SAVEFIG_KW)
    plt.close(fig)
    return path
