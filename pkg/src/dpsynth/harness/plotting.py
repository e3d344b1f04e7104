"""Radar charts of rescaled utility, one polygon per ε."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..metrics.results import CATEGORIES, axis_order  # noqa: E402

MIN_AXES = 3
_WEDGE_SHADES = {"marginal": "#dbe9f6", "joint": "#a9cce3", "correlation": "#7fb3d5"}


class DegenerateChart(ValueError):
    pass


def polygon_values(rows: list[dict]):
    """``(axes, categories, {ε: values})`` from one algorithm's aggregate rows;
    absent metrics are NaN."""
    axes = axis_order(dict.fromkeys(r["metric"] for r in rows))
    cats = {r["metric"]: r["category"] for r in rows}
    by_eps: dict[float, list[float]] = {}
    lookup = {(r["metric"], r["epsilon"]): r["rescaled"] for r in rows}
    for eps in sorted({r["epsilon"] for r in rows}):
        vals = [lookup.get((a, eps)) for a in axes]
        by_eps[eps] = [math.nan if v is None else float(v) for v in vals]
    return axes, [cats[a] for a in axes], by_eps


def radar_chart(algorithm: str, rows: list[dict], path) -> Path:
    axes, cats, by_eps = polygon_values(rows)
    if len(axes) < MIN_AXES:
        raise DegenerateChart(f"a radar chart needs at least {MIN_AXES} metrics, got {len(axes)}")
    n = len(axes)
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    width = 2 * np.pi / n

    plt.rcParams["svg.hashsalt"] = "dpsynth"
    fig = plt.figure(figsize=(7, 7))
    ax = fig.add_subplot(projection="polar")
    # category wedges behind the polygons
    for cat in CATEGORIES:
        idx = [i for i, c in enumerate(cats) if c == cat]
        if idx:
            ax.bar(theta[idx], np.ones(len(idx)), width=width, color=_WEDGE_SHADES[cat],
                   alpha=0.5, edgecolor="none", label=f"{cat} metrics", zorder=0)

    eps_list = list(by_eps)
    # darker orange for lower ε
    shades = plt.get_cmap("Oranges")(np.linspace(0.9, 0.35, len(eps_list)))
    closed = np.r_[theta, theta[:1]]
    for eps, color in zip(eps_list, shades):
        vals = np.array(by_eps[eps])
        drawn = np.nan_to_num(vals, nan=0.0)
        ax.fill(closed, np.r_[drawn, drawn[:1]], color=color, alpha=0.45, zorder=2)
        ax.plot(closed, np.r_[drawn, drawn[:1]], color=color, lw=1.2, label=f"ε={eps:g}", zorder=3)

    labels = []
    for i, a in enumerate(axes):
        gap = any(math.isnan(by_eps[e][i]) for e in eps_list)
        labels.append(f"{a}\n(absent)" if gap else a)
    ax.set_xticks(theta)
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_ylim(0, 1)
    ax.set_yticks([0.25, 0.5, 0.75, 1.0])
    ax.set_yticklabels(["0.25", "0.5", "0.75", "1"], fontsize=6)
    ax.set_title(f"{algorithm}: utility by metric (1 = best)", fontsize=10)
    ax.legend(loc="upper right", bbox_to_anchor=(1.3, 1.1), fontsize=7)
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return path
