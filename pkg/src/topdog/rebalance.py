"""Turning index reports into next-season supply plans.

Branches are clustered by their index value through interval boundaries
(left-open, right-closed: a value sitting exactly on a boundary falls into
the lower cluster).  Each cluster j carries an additive share increment
Delta_j; the next plan renormalizes the incremented shares:

    S~(b) = (S(b) + Delta_j(b)) / sum_b' (S(b') + Delta_j(b'))

Increments act on shares, not item counts, so the result is a valid share
vector for any season size.  Integer item allocations are derived from a
plan by largest-remainder apportionment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .dataset import Dataset
from .errors import DegenerateTdis, NegativeShare, ZeroMass, ZeroSupply
from .tdi import TdiReport


@dataclass(frozen=True)
class ClusterConfig:
    """Interval boundaries and per-cluster share increments.

    ``boundaries`` must be strictly ascending and positive; with l clusters
    there are l-1 boundaries and exactly l increments.  By default the
    increments must be nondecreasing (a higher index never earns a smaller
    increment); pass ``monotone=False`` to allow arbitrary increments.
    """

    boundaries: tuple[float, ...]
    increments: tuple[float, ...]
    monotone: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "boundaries", tuple(float(b) for b in self.boundaries))
        object.__setattr__(self, "increments", tuple(float(d) for d in self.increments))
        if len(self.increments) != len(self.boundaries) + 1:
            raise ValueError(
                f"{len(self.boundaries)} boundaries need "
                f"{len(self.boundaries) + 1} increments, got {len(self.increments)}"
            )
        if any(b <= 0 for b in self.boundaries):
            raise ValueError(f"boundaries must be positive, got {self.boundaries}")
        if any(b2 <= b1 for b1, b2 in zip(self.boundaries, self.boundaries[1:])):
            raise ValueError(
                f"boundaries must be strictly ascending, got {self.boundaries}"
            )
        if self.monotone and any(
            d2 < d1 for d1, d2 in zip(self.increments, self.increments[1:])
        ):
            raise ValueError(
                "increments must be nondecreasing across clusters "
                f"(got {self.increments}); pass monotone=False to override"
            )

    @property
    def n_clusters(self) -> int:
        return len(self.increments)

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(
                {
                    "boundaries": list(self.boundaries),
                    "increments": list(self.increments),
                    "monotone": self.monotone,
                },
                indent=2,
            )
            + "\n"
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "ClusterConfig":
        raw = json.loads(Path(path).read_text())
        return cls(
            boundaries=tuple(raw["boundaries"]),
            increments=tuple(raw["increments"]),
            monotone=bool(raw.get("monotone", True)),
        )


@dataclass(frozen=True, eq=False)
class SupplyPlan:
    """Per-branch share of the next season's total items."""

    branches: tuple[str, ...]
    shares: np.ndarray  # float64, nonnegative, sums to 1
    provenance: str = "historic"

    def __post_init__(self) -> None:
        shares = np.asarray(self.shares, dtype=np.float64)
        object.__setattr__(self, "shares", shares)
        if len(self.branches) != shares.size:
            raise ValueError("one share per branch required")
        if (shares < 0).any():
            bad = self.branches[int(np.argmax(shares < 0))]
            raise ValueError(f"share of branch {bad!r} is negative")
        total = float(shares.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"shares must sum to 1 within 1e-9, got {total!r}")
        shares.flags.writeable = False

    def share_of(self, branch_id: str) -> float:
        return float(self.shares[self.branches.index(branch_id)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.branches, self.shares.tolist()))

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({"branch_id": list(self.branches), "share": self.shares})

    def to_csv(self, path: str | Path) -> None:
        self.frame().to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path: str | Path, provenance: str = "historic") -> "SupplyPlan":
        frame = pd.read_csv(path, dtype={"branch_id": str})
        if list(frame.columns) != ["branch_id", "share"]:
            raise ValueError(f"{path}: expected columns ['branch_id', 'share']")
        return cls(
            branches=tuple(frame["branch_id"]),
            shares=frame["share"].to_numpy(dtype=np.float64),
            provenance=provenance,
        )

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "SupplyPlan":
        """Historic plan: each branch's share of the season's delivered items."""
        totals = dataset.supply.sum(axis=1).astype(np.float64)
        grand = totals.sum()
        if grand == 0:
            raise ZeroSupply("dataset has zero total supply")
        return cls(
            branches=dataset.branches, shares=totals / grand, provenance="historic"
        )

    @classmethod
    def from_supply_csv(cls, path: str | Path) -> "SupplyPlan":
        """Historic plan read straight off a raw supply table."""
        from .dataset import SUPPLY_COLUMNS, _parse_supply

        frame = _parse_supply(path)
        totals = frame.groupby("branch_id", sort=True)[SUPPLY_COLUMNS[2]].sum()
        grand = float(totals.sum())
        if grand == 0:
            raise ZeroSupply(f"{path}: zero total supply")
        return cls(
            branches=tuple(totals.index),
            shares=totals.to_numpy(dtype=np.float64) / grand,
            provenance="historic",
        )

    @classmethod
    def uniform(cls, branches: tuple[str, ...]) -> "SupplyPlan":
        n = len(branches)
        return cls(branches=branches, shares=np.full(n, 1.0 / n), provenance="uniform")


def default_intervals(report: TdiReport, n_clusters: int = 3) -> tuple[float, ...]:
    """Equal-count cluster boundaries from the occurring index values.

    Boundaries sit at the k/l empirical quantiles (midpoint convention) of
    the report's index values, so each cluster captures about the same
    number of branches.  Raises :class:`DegenerateTdis` when the values are
    too concentrated to yield l distinct, strictly ascending boundaries.
    """
    if n_clusters < 2:
        raise ValueError(f"need >= 2 clusters, got {n_clusters}")
    values = report.tdi_values
    if len(np.unique(values)) < n_clusters:
        raise DegenerateTdis(
            f"need >= {n_clusters} distinct index values for {n_clusters} "
            f"clusters, got {len(np.unique(values))}"
        )
    quantiles = np.arange(1, n_clusters) / n_clusters
    boundaries = np.quantile(values, quantiles, method="midpoint")
    if (np.diff(boundaries) <= 0).any():
        raise DegenerateTdis(
            "index values too concentrated: quantile boundaries are not "
            f"strictly ascending ({boundaries.tolist()})"
        )
    return tuple(float(b) for b in boundaries)


def default_increments(
    n_branches: int, n_clusters: int = 3, scale: float = 0.1
) -> tuple[float, ...]:
    """Evenly spaced share increments from -scale/|B| to +scale/|B|.

    For the default three clusters this is (-d, 0, +d) with d = scale/|B|:
    take share away from branches the index marks oversupplied and hand it
    to the undersupplied ones.
    """
    if n_branches < 1:
        raise ValueError(f"need >= 1 branch, got {n_branches}")
    delta = scale / n_branches
    return tuple(np.linspace(-delta, delta, n_clusters).tolist())


def classify(report: TdiReport, config: ClusterConfig) -> dict[str, int]:
    """Assign every branch its 1-based cluster from the index value.

    Intervals are left-open, right-closed: a value equal to a boundary goes
    to the lower cluster.
    """
    boundaries = np.asarray(config.boundaries)
    clusters = np.searchsorted(boundaries, report.tdi_values, side="left") + 1
    return dict(zip(report.branches, clusters.tolist()))


def update_supply(
    plan: SupplyPlan, assignment: Mapping[str, int], config: ClusterConfig
) -> SupplyPlan:
    """Apply cluster increments to a plan and renormalize.

    A uniformly zero increment vector is the exact identity (the plan's
    shares already sum to 1, so the renormalization divides by 1).
    """
    missing = [b for b in plan.branches if b not in assignment]
    if missing:
        raise ValueError(f"assignment misses branches, e.g. {missing[0]!r}")
    clusters = np.array([assignment[b] for b in plan.branches], dtype=np.int64)
    if clusters.min() < 1 or clusters.max() > config.n_clusters:
        raise ValueError(
            f"cluster assignments must lie in 1..{config.n_clusters}, "
            f"got range {clusters.min()}..{clusters.max()}"
        )
    deltas = np.asarray(config.increments)[clusters - 1]
    if not deltas.any():
        return replace(plan, provenance="updated")
    adjusted = plan.shares + deltas
    if (adjusted < 0).any():
        bad = plan.branches[int(np.argmax(adjusted < 0))]
        raise NegativeShare(
            f"increment drives the share of branch {bad!r} below zero"
        )
    total = adjusted.sum()
    if total <= 0:
        raise ZeroMass("all adjusted shares are zero; cannot renormalize")
    return SupplyPlan(
        branches=plan.branches, shares=adjusted / total, provenance="updated"
    )


def discretize_plan(plan: SupplyPlan, total_items: int) -> dict[str, int]:
    """Integer item allocation by largest-remainder apportionment.

    Allocations sum exactly to ``total_items`` and each branch stays within
    one item of its exact proportional quota.  Remainder ties are broken by
    branch id, ascending.
    """
    if total_items < 0:
        raise ValueError(f"total_items must be >= 0, got {total_items}")
    quotas = plan.shares * total_items
    floors = np.floor(quotas).astype(np.int64)
    remainder = int(total_items - floors.sum())
    order = sorted(
        range(len(plan.branches)),
        key=lambda i: (-(quotas[i] - floors[i]), plan.branches[i]),
    )
    allocation = floors.copy()
    for i in order[:remainder]:
        allocation[i] += 1
    return dict(zip(plan.branches, allocation.tolist()))


def allocation_to_csv(allocation: Mapping[str, int], path: str | Path) -> None:
    pd.DataFrame(
        {"branch_id": list(allocation), "items": list(allocation.values())}
    ).to_csv(path, index=False)
