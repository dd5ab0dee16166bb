"""Report figures: grouped P/R/F1 bars and token totals per cell."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .core import Approach, PromptStyle  # noqa: E402
from .evalkit import METRICS, CellKey, MetricsReport  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

SERIES = [(a, s) for a in Approach for s in PromptStyle]
COLORS = {
    (Approach.SINGLE_ROLE, PromptStyle.BASIC): "#9ecae1",
    (Approach.SINGLE_ROLE, PromptStyle.COT): "#4292c6",
    (Approach.MULTI_ROLE, PromptStyle.BASIC): "#fdae6b",
    (Approach.MULTI_ROLE, PromptStyle.COT): "#e6550d",
}


def _label(approach: Approach, style: PromptStyle) -> str:
    return f"{approach.value.replace('_', '-')} / {style.value}"


def _rows(report: MetricsReport) -> list[tuple[str, str]]:
    return sorted({(k.group, k.category) for k in report.cells})


def plot_metrics(report: MetricsReport, path: str | Path) -> Path | None:
    """Grouped bars of precision, recall and F1; one panel per metric. None when the report is empty."""
    rows = _rows(report)
    if not rows:
        return None
    x = np.arange(len(rows))
    width = 0.8 / len(SERIES)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(METRICS), 1, figsize=(max(6.0, 0.6 * len(rows) + 2), 7), sharex=True)
        for ax, metric in zip(axes, METRICS):
            for i, (approach, style) in enumerate(SERIES):
                vals = []
                for group, cat in rows:
                    cell = report.cells.get(CellKey(group, cat, approach.value, style.value))
                    value = None if cell is None else cell.metric(metric)
                    vals.append(np.nan if value is None else value)
                if np.all(np.isnan(vals)):
                    continue
                ax.bar(x + (i - (len(SERIES) - 1) / 2) * width, vals, width,
                       color=COLORS[(approach, style)], label=_label(approach, style))
            ax.set_ylim(0, 1)
            ax.set_ylabel(metric if metric != "f1" else "F1")
            ax.grid(axis="y", alpha=0.3)
        axes[0].legend(ncol=len(SERIES), loc="lower left", bbox_to_anchor=(0, 1.02))
        axes[-1].set_xticks(x)
        axes[-1].set_xticklabels([f"{g}\n{c}" for g, c in rows])
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_tokens(report: MetricsReport, path: str | Path) -> Path | None:
    rows = _rows(report)
    if not rows or not any(c.total_tokens for c in report.cells.values()):
        return None
    x = np.arange(len(rows))
    width = 0.8 / len(SERIES)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(6.0, 0.6 * len(rows) + 2), 3.5))
        for i, (approach, style) in enumerate(SERIES):
            vals = []
            for group, cat in rows:
                cell = report.cells.get(CellKey(group, cat, approach.value, style.value))
                vals.append(0 if cell is None else cell.total_tokens)
            ax.bar(x + (i - (len(SERIES) - 1) / 2) * width, vals, width,
                   color=COLORS[(approach, style)], label=_label(approach, style))
        ax.set_ylabel("tokens consumed")
        ax.set_xticks(x)
        ax.set_xticklabels([f"{g}\n{c}" for g, c in rows])
        ax.legend(ncol=2)
        ax.grid(axis="y", alpha=0.3)
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
    return path


def render_figures(report: MetricsReport, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [plot_metrics(report, out_dir / "report_metrics.png"), plot_tokens(report, out_dir / "report_tokens.png")]
    return [p for p in written if p is not None]
