"""Matplotlib renderings of the report tables.

Every report command of the CLI writes these figures next to its CSV
output; the CSV stays the canonical data interface and the figures are a
convenience view of the same numbers.  All rendering uses the Agg backend,
so no display is required.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .sampling import DiscrepancyCurve  # noqa: E402
from .simulator import Trajectory  # noqa: E402
from .tdi import RelativeDistributionMatrix, TdiSpread  # noqa: E402


def save_figure(fig: plt.Figure, path: str | Path) -> None:
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def discrepancy_figure(curve: DiscrepancyCurve) -> plt.Figure:
    """Per-day estimator discrepancies: sample-vs-sample and vs supply."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    series = (
        ("delta(D1, D2)", curve.delta_samples),
        ("delta(D1, supply)", curve.delta_supply_d1),
        ("delta(D2, supply)", curve.delta_supply_d2),
        ("delta(all, supply)", curve.delta_supply_all),
    )
    for label, values in series:
        ax.plot(curve.days, values, label=label, linewidth=1.4)
    ax.set_xlabel("day")
    ax.set_ylabel("L1 discrepancy")
    ax.set_ylim(bottom=0)
    ax.set_title(f"Naive estimator discrepancies (seed {curve.seed})")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    return fig


def relative_distribution_figure(
    matrix: RelativeDistributionMatrix, title: str = "Relative index distribution"
) -> plt.Figure:
    """Stacked per-branch bars of the row-normalized index profile.

    Branches are already ordered by descending universe index; a season
    with a sample-robust index shows near-equal stack segments everywhere.
    """
    n_b = len(matrix.branches)
    fig, ax = plt.subplots(figsize=(max(8, min(16, n_b / 16)), 4.5))
    x = np.arange(n_b)
    bottom = np.zeros(n_b)
    for i, sample_id in enumerate(matrix.sample_ids):
        ax.bar(
            x,
            matrix.entries[:, i],
            bottom=bottom,
            width=1.0,
            label=sample_id,
        )
        bottom += matrix.entries[:, i]
    ax.set_xlim(-0.5, n_b - 0.5)
    ax.set_ylim(0, 1)
    ax.set_xlabel("branch (by descending universe index)")
    ax.set_ylabel("share of summed index")
    ax.set_title(title)
    ax.legend(frameon=False, ncol=7, fontsize=8)
    return fig


def occurring_tdis_figure(spreads: Sequence[TdiSpread]) -> plt.Figure:
    """Occurring index values per sample with their quartile boxes."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    rng = np.random.default_rng(0)
    for i, s in enumerate(spreads):
        jitter = rng.uniform(-0.18, 0.18, size=len(s.values))
        ax.plot(
            np.full(len(s.values), i + 1) + jitter,
            s.values,
            ".",
            markersize=3,
            alpha=0.45,
        )
    ax.boxplot(
        [s.values for s in spreads],
        positions=np.arange(1, len(spreads) + 1),
        widths=0.55,
        showfliers=False,
        medianprops={"color": "black"},
    )
    ax.set_xticks(np.arange(1, len(spreads) + 1))
    ax.set_xticklabels([s.sample_id for s in spreads])
    ax.set_xlabel("sample")
    ax.set_ylabel("index value")
    ax.set_title("Occurring index values per sample")
    ax.grid(axis="y", alpha=0.3)
    return fig


def trajectory_figure(trajectory: Trajectory) -> plt.Figure:
    """Gap to the true demand weights over the rebalancing rounds."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    rounds = np.arange(len(trajectory.gaps))
    ax.plot(rounds, trajectory.gaps, marker="o", linewidth=1.6)
    ax.set_xlabel("round")
    ax.set_ylabel("L1 gap to true weights")
    ax.set_ylim(bottom=0)
    ax.set_title("Closed-loop supply alignment")
    ax.grid(alpha=0.3)
    ax2 = ax.twinx()
    ax2.plot(
        [r.round_index for r in trajectory.rounds],
        [r.recovery for r in trajectory.rounds],
        marker="s",
        markersize=4,
        linewidth=1.0,
        color="tab:green",
        alpha=0.7,
    )
    ax2.set_ylabel("rank recovery", color="tab:green")
    ax2.set_ylim(-1.05, 1.05)
    return fig
