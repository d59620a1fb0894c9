"""Figures for evaluation reports.

Everything renders through the Agg backend into files next to the table and
CSV outputs; nothing is shown interactively.
"""

from __future__ import annotations

import math
import re
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

golden_ratio = (math.sqrt(5) - 1.0) / 2.0

params = {
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "font.size": 9,
    "font.family": "sans-serif",
    "font.sans-serif": ["DejaVu Sans"],
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "svg.hashsalt": "vosbench",
}

# Agg embeds the software string; drop it so output only depends on the data
_SAVE_META = {"Software": None}


def new_figure(width: float = 6.0, height: float | None = None):
    """Figure and axes with the toolkit's rc settings applied."""
    if height is None:
        height = width * golden_ratio
    with plt.rc_context(params):
        fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def _save(fig, path: Path) -> Path:
    fig.savefig(path, metadata=_SAVE_META)
    plt.close(fig)
    return path


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_") or "sequence"


def plot_frame_curves(rows: list[dict[str, Any]], title: str, path: Path) -> Path:
    """Per-frame J and adaptive F for every object of one sequence.

    Frames where ground truth is absent are shaded.
    """
    with plt.rc_context(params):
        fig, ax = new_figure()
        for r in rows:
            frames = [p["frame"] for p in r["per_frame"]]
            ax.plot(frames, [100 * p["J"] for p in r["per_frame"]], marker="o",
                    label=f"obj {r['object']} J")
            ax.plot(frames, [100 * p["F_dot"] for p in r["per_frame"]], linestyle="--",
                    label=f"obj {r['object']} F_dot")
            for p in r["per_frame"]:
                if not p["gt"]:
                    ax.axvspan(p["frame"] - 0.5, p["frame"] + 0.5, color="0.85", zorder=0)
        ax.set_ylim(-2, 102)
        ax.set_xlabel("frame")
        ax.set_ylabel("score (%)")
        ax.set_title(title)
        ax.legend(loc="lower left", ncol=2)
        fig.tight_layout()
        return _save(fig, path)


def plot_summary(doc: dict[str, Any], path: Path) -> Path:
    """Bar chart of the dataset means, one bar per report column."""
    summary = doc["summary"]
    cols = [c for c in doc["columns"] if summary.get(c) is not None]
    with plt.rc_context(params):
        fig, ax = new_figure()
        values = [100 * summary[c] for c in cols]
        bars = ax.bar(range(len(cols)), values, color="#2b8cbe")
        for b, v in zip(bars, values):
            ax.text(b.get_x() + b.get_width() / 2, v + 1, f"{v:.2f}", ha="center", fontsize=7)
        ax.set_xticks(range(len(cols)))
        ax.set_xticklabels(cols, rotation=30, ha="right")
        ax.set_ylim(0, 110)
        ax.set_ylabel("mean score (%)")
        ax.set_title(f"{summary.get('rows', len(doc['rows']))} sequence-object rows")
        fig.tight_layout()
        return _save(fig, path)


def plot_comparison(values: dict[str, float], title: str, path: Path) -> Path:
    """Bars for a handful of named scores (e.g. prior on vs off)."""
    with plt.rc_context(params):
        fig, ax = new_figure(4.0)
        names = list(values)
        ax.bar(range(len(names)), [100 * values[n] for n in names], color="#2b8cbe")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names)
        ax.set_ylim(0, 105)
        ax.set_ylabel("score (%)")
        ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def render_figures(doc: dict[str, Any], out_dir) -> list[Path]:
    """Summary chart plus one per-frame chart per sequence."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [plot_summary(doc, out_dir / "summary.png")]
    by_seq: dict[str, list[dict[str, Any]]] = {}
    for r in doc["rows"]:
        if r.get("per_frame"):
            by_seq.setdefault(r["sequence"], []).append(r)
    for seq, rows in by_seq.items():
        written.append(plot_frame_curves(rows, seq, out_dir / f"{_slug(seq)}.png"))
    return written
