"""Optional figures for the CLI (matplotlib, file output only)."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

COLORS = {"Obstacle": "0.6", "Goal": "tab:green", "Target": "tab:purple",
          "Key": "tab:blue", "Door": "tab:red", "Passage": "tab:orange"}


def plot_trajectory(scenario, states, path, title: str | None = None) -> None:
    """Regions of ``scenario`` with the position trace of ``states``."""
    fig, ax = plt.subplots(figsize=(5, 5))
    for r in scenario.regions:
        ax.add_patch(Rectangle((r.xmin, r.ymin), r.xmax - r.xmin, r.ymax - r.ymin,
                               color=COLORS.get(r.kind, "tab:gray"), alpha=0.5))
        ax.text((r.xmin + r.xmax) / 2, (r.ymin + r.ymax) / 2, r.name,
                ha="center", va="center", fontsize=8)
    ax.plot(states[:, 0], states[:, 1], "k.-", lw=1, ms=4)
    ax.plot(states[0, 0], states[0, 1], "ko", ms=7, mfc="none")
    lo, hi = scenario.bounds.x_lo, scenario.bounds.x_hi
    if all(abs(v) < float("inf") for v in (lo[0], hi[0], lo[1], hi[1])):
        ax.set_xlim(lo[0], hi[0])
        ax.set_ylim(lo[1], hi[1])
    ax.set_aspect("equal")
    ax.set_title(title or scenario.name)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_bench(rows, path) -> None:
    """Box plots of robustness and wall time per (scenario, T, mode, smoother)."""
    rob, wall = defaultdict(list), defaultdict(list)
    for r in rows:
        key = f"{r['scenario']}\nT={r['horizon']} {r['mode']}/{r['smoother']}"
        if r.get("robustness_orig") not in (None, ""):
            rob[key].append(float(r["robustness_orig"]))
        wall[key].append(float(r["wall_ms"]) / 1e3)
    keys = sorted(wall)
    fig, axes = plt.subplots(1, 2, figsize=(max(6, 1.6 * len(keys)), 4))
    axes[0].boxplot([rob.get(k, [float("nan")]) for k in keys])
    axes[0].set_ylabel("robustness")
    axes[0].axhline(0.0, color="r", lw=0.8)
    axes[1].boxplot([wall[k] for k in keys])
    axes[1].set_ylabel("wall time (s)")
    for ax in axes:
        ax.set_xticks(range(1, len(keys) + 1), keys, fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
