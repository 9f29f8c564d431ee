"""Bar charts for evaluation reports.

Rendering uses the non-interactive Agg backend, so figures can be written
from headless jobs.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

METHOD_COLORS = {
    "mertens": "#7f7f7f",
    "ssla-mertens": "#1f77b4",
    "proposed": "#d62728",
}

STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "axes.grid.axis": "y",
    "grid.alpha": 0.3,
    "savefig.dpi": 120,
    # fixed metadata keeps the files reproducible
    "svg.hashsalt": "huemef",
}


def grouped_bars(ax, scenes: Sequence[str], methods: Sequence[str], values: np.ndarray):
    """Draw ``values[scene, method]`` as groups of bars, one group per scene."""
    n = len(methods)
    width = 0.8 / max(n, 1)
    x = np.arange(len(scenes))
    for k, method in enumerate(methods):
        ax.bar(
            x + (k - (n - 1) / 2) * width, values[:, k], width,
            label=method, color=METHOD_COLORS.get(method),
        )
    ax.set_xticks(x)
    ax.set_xticklabels(scenes, rotation=30, ha="right")
    return ax


def _table(rows, column: str):
    scenes = list(dict.fromkeys(r.scene for r in rows))
    methods = list(dict.fromkeys(r.method for r in rows))
    vals = np.full((len(scenes), len(methods)), np.nan)
    for r in rows:
        vals[scenes.index(r.scene), methods.index(r.method)] = getattr(r, column)
    return scenes, methods, vals


def metric_figure(rows, column: str, ylabel: str, path, ylim=None) -> Path:
    scenes, methods, vals = _table(rows, column)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(scenes), 3.2))
        grouped_bars(ax, scenes, methods, vals)
        ax.set_ylabel(ylabel)
        if ylim is not None:
            ax.set_ylim(*ylim)
        ax.legend(frameon=False, fontsize=8, ncol=len(methods), loc="lower center",
                  bbox_to_anchor=(0.5, 1.0))
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path


def write_eval_figures(rows, out_dir) -> list[Path]:
    """Mean hue difference and TMQI bar charts, scenes plus the mean group."""
    out_dir = Path(out_dir)
    return [
        metric_figure(rows, "mean_dH", r"mean $\Delta H$ (CIEDE2000)", out_dir / "delta_h.png"),
        metric_figure(rows, "TMQI_Q", "TMQI Q", out_dir / "tmqi.png", ylim=(0.0, 1.0)),
    ]
