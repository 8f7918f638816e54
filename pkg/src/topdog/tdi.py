"""The top-dog index: rank-based branch demand scoring from stock-out days.

Per product, the carrying branches are compared by stock-out day.  A branch
collects a winning point when the branches selling out no later than it
(itself included) make up at most a third of the carriers, and a losing
point when the branches selling out no earlier than it do.  The comparison
is tie-aware: it counts branches, not rank positions, and the one-third
bound is exact (no rounding).  Products carried by at most two branches can
never award points and are effectively inert.

The index of a branch aggregates its points over a product sample as

    TDI(b) = (W(b) + C) / (L(b) + C)

with a dampening constant C > 0 that pulls branches with few points toward
the neutral value 1.  Indexes computed on overlapping samples of the same
season should tell the same story per branch; the relative-distribution
matrix and its robustness score quantify exactly that stability.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from .errors import NonPositiveDampening, TooFewBranches
from .sampling import SAMPLE_IDS, SamplePartition
from .stockout import StockOutTable

DEFAULT_DAMPENING = 5.0


def _check_dampening(dampening: float) -> float:
    if not dampening > 0:
        raise NonPositiveDampening(
            f"dampening must be > 0, got {dampening!r}"
        )
    return float(dampening)


@lru_cache(maxsize=8)
def _point_matrices(table: StockOutTable) -> tuple[np.ndarray, np.ndarray]:
    """Per-product winning/losing point indicators, bool [n_branches, n_products].

    Tie-aware counting via min/max ranks: the max rank of a carrier equals
    the number of carriers selling out no later than it, and carriers minus
    min rank plus one equals the number selling out no earlier.  Non-carried
    pairs key at +inf, so they never disturb the counts of finite keys.
    """
    keys = table.order_keys
    carried = table.carried
    n = carried.sum(axis=0).astype(np.int64)
    count_le = rankdata(keys, method="max", axis=0).astype(np.int64)
    count_ge = n[None, :] - rankdata(keys, method="min", axis=0).astype(np.int64) + 1
    win = carried & (3 * count_le <= n[None, :])
    lose = carried & (3 * count_ge <= n[None, :])
    win.flags.writeable = False
    lose.flags.writeable = False
    return win, lose


def _sample_counts(
    table: StockOutTable, mask: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    win, lose = _point_matrices(table)
    return win[:, mask].sum(axis=1), lose[:, mask].sum(axis=1)


def top_dog_counts(
    table: StockOutTable, sample: Iterable[str] | None = None
) -> dict[str, tuple[int, int]]:
    """Winning and losing point counts of every branch over a product sample.

    ``sample`` is an iterable of product ids; ``None`` counts over every
    product.  Returns a map branch id -> (W, L).  Branches carrying no
    sample product get (0, 0).
    """
    if sample is None:
        mask = np.ones(len(table.products), dtype=bool)
    else:
        index = table.product_index
        mask = np.zeros(len(table.products), dtype=bool)
        for pid in sample:
            try:
                mask[index[pid]] = True
            except KeyError:
                raise KeyError(f"sample product {pid!r} not in table") from None
    wins, losses = _sample_counts(table, mask)
    return {
        b: (int(w), int(l))
        for b, w, l in zip(table.branches, wins, losses)
    }


def tdi(wins: int, losses: int, dampening: float = DEFAULT_DAMPENING) -> float:
    """Dampened win/loss ratio (W + C) / (L + C).

    Also accepts numpy arrays for W and L.  With no points at all the index
    is exactly 1; for large C it approaches 1 from either side.
    """
    c = _check_dampening(dampening)
    result = (wins + c) / (losses + c)
    return float(result) if np.isscalar(wins) else result


@dataclass(frozen=True, eq=False)
class TdiReport:
    """Index values of every branch for one product sample."""

    sample_id: str
    dampening: float
    branches: tuple[str, ...]
    wins: np.ndarray  # int64
    losses: np.ndarray  # int64

    def __post_init__(self) -> None:
        _check_dampening(self.dampening)
        self.wins.flags.writeable = False
        self.losses.flags.writeable = False

    @cached_property
    def tdi_values(self) -> np.ndarray:
        values = (self.wins + self.dampening) / (self.losses + self.dampening)
        values.flags.writeable = False
        return values

    @cached_property
    def branch_index(self) -> dict[str, int]:
        return {b: i for i, b in enumerate(self.branches)}

    def tdi_of(self, branch_id: str) -> float:
        return float(self.tdi_values[self.branch_index[branch_id]])

    def counts_of(self, branch_id: str) -> tuple[int, int]:
        i = self.branch_index[branch_id]
        return int(self.wins[i]), int(self.losses[i])

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "branch_id": list(self.branches),
                "sample": self.sample_id,
                "W": self.wins,
                "L": self.losses,
                "C": self.dampening,
                "TDI": self.tdi_values,
            }
        )

    def to_csv(self, path: str | Path) -> None:
        self.frame().to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path: str | Path) -> "TdiReport":
        frame = pd.read_csv(
            path,
            dtype={"branch_id": str, "sample": str},
        )
        expected = ["branch_id", "sample", "W", "L", "C", "TDI"]
        if list(frame.columns) != expected:
            raise ValueError(f"{path}: expected columns {expected}")
        samples = frame["sample"].unique()
        if len(samples) != 1:
            raise ValueError(f"{path}: expected a single sample, got {list(samples)}")
        dampenings = frame["C"].unique()
        if len(dampenings) != 1:
            raise ValueError(f"{path}: inconsistent dampening values")
        return cls(
            sample_id=str(samples[0]),
            dampening=float(dampenings[0]),
            branches=tuple(frame["branch_id"]),
            wins=frame["W"].to_numpy(dtype=np.int64),
            losses=frame["L"].to_numpy(dtype=np.int64),
        )


def tdi_report(
    table: StockOutTable,
    partition: SamplePartition,
    dampening: float = DEFAULT_DAMPENING,
) -> list[TdiReport]:
    """Index report per sample D1..D7 over one stock-out table."""
    _check_dampening(dampening)
    if partition.products != table.products:
        raise ValueError("partition was built for a different product universe")
    reports = []
    for sample_id in SAMPLE_IDS:
        wins, losses = _sample_counts(table, partition.mask(sample_id))
        reports.append(
            TdiReport(
                sample_id=sample_id,
                dampening=float(dampening),
                branches=table.branches,
                wins=wins.astype(np.int64),
                losses=losses.astype(np.int64),
            )
        )
    return reports


@dataclass(frozen=True, eq=False)
class RelativeDistributionMatrix:
    """Row-normalized per-branch index profile across samples.

    Entry (b, i) is the branch's index on sample i divided by the sum of its
    indexes over all samples, so every row sums to 1.  For a branch whose
    index is stable across samples, the row is flat at 1/n_samples.
    """

    branches: tuple[str, ...]
    sample_ids: tuple[str, ...]
    entries: np.ndarray  # float64 [n_branches, n_samples]

    def __post_init__(self) -> None:
        self.entries.flags.writeable = False

    def frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            self.entries,
            columns=[f"rel_{s}" for s in self.sample_ids],
        )
        frame.insert(0, "branch_id", list(self.branches))
        return frame

    def to_csv(self, path: str | Path) -> None:
        self.frame().to_csv(path, index=False)


def relative_distribution_from_values(
    branches: Sequence[str],
    sample_ids: Sequence[str],
    values: np.ndarray,
    order_by: str | None = None,
) -> RelativeDistributionMatrix:
    """Row-normalize a positive per-branch, per-sample value matrix.

    With ``order_by`` set to a sample id, rows are sorted by that sample's
    raw value, descending (ties broken by branch id).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (len(branches), len(sample_ids)):
        raise ValueError("value matrix shape does not match branches x samples")
    if not (values > 0).all():
        raise ValueError("relative distribution requires strictly positive values")
    branches = tuple(branches)
    if order_by is not None:
        column = list(sample_ids).index(order_by)
        order = sorted(
            range(len(branches)), key=lambda i: (-values[i, column], branches[i])
        )
        values = values[order]
        branches = tuple(branches[i] for i in order)
    entries = values / values.sum(axis=1, keepdims=True)
    return RelativeDistributionMatrix(
        branches=branches, sample_ids=tuple(sample_ids), entries=entries
    )


def relative_distribution(reports: Sequence[TdiReport]) -> RelativeDistributionMatrix:
    """Relative index distribution over the seven samples of a season.

    Rows are ordered by descending index on the universe sample D7, so the
    most undersupplied branches come first.
    """
    if not reports:
        raise ValueError("need at least one report")
    branches = reports[0].branches
    for r in reports[1:]:
        if r.branches != branches:
            raise ValueError("reports cover different branch sets")
    ordered = sorted(reports, key=lambda r: r.sample_id)
    sample_ids = tuple(r.sample_id for r in ordered)
    if len(set(sample_ids)) != len(sample_ids):
        raise ValueError(f"duplicate sample ids: {sample_ids}")
    if "D7" not in sample_ids:
        raise ValueError("reports must include the universe sample D7")
    values = np.column_stack([r.tdi_values for r in ordered])
    return relative_distribution_from_values(
        branches, sample_ids, values, order_by="D7"
    )


def robustness_score(matrix: RelativeDistributionMatrix) -> float:
    """Worst-pair instability of the per-branch index ratios.

    For every pair of samples, take the ratio of the two matrix columns per
    branch and compute its coefficient of variation across branches; the
    score is the maximum over all pairs.  A season whose branch indexes
    follow one deterministic cross-sample pattern scores exactly 0; larger
    values mean the samples disagree about the branches.
    """
    if len(matrix.branches) < 2:
        raise TooFewBranches(
            f"robustness score needs >= 2 branches, got {len(matrix.branches)}"
        )
    entries = matrix.entries
    score = 0.0
    for i in range(len(matrix.sample_ids)):
        for j in range(i + 1, len(matrix.sample_ids)):
            ratios = entries[:, i] / entries[:, j]
            cv = float(ratios.std(ddof=1) / ratios.mean())
            score = max(score, cv)
    return score


def baseline_matrices(
    n_branches: int, seed: int
) -> tuple[RelativeDistributionMatrix, RelativeDistributionMatrix]:
    """Reference matrices bracketing the robustness score.

    The deterministic baseline gives every branch one constant index across
    all samples (score exactly 0).  The random baseline draws every cell
    independently uniform from [0.5, 1.5], mimicking index values with no
    cross-sample structure at all.
    """
    if n_branches < 1:
        raise ValueError(f"need >= 1 branch, got {n_branches}")
    rng = np.random.default_rng(seed)
    branches = tuple(f"b{i:04d}" for i in range(n_branches))
    constants = rng.uniform(0.5, 1.5, size=n_branches)
    deterministic = relative_distribution_from_values(
        branches,
        SAMPLE_IDS,
        np.tile(constants[:, None], (1, len(SAMPLE_IDS))),
        order_by="D7",
    )
    random_values = rng.uniform(0.5, 1.5, size=(n_branches, len(SAMPLE_IDS)))
    random = relative_distribution_from_values(
        branches, SAMPLE_IDS, random_values, order_by="D7"
    )
    return deterministic, random


@dataclass(frozen=True, eq=False)
class TdiSpread:
    """Sorted index values of one sample with their five-number summary."""

    sample_id: str
    values: np.ndarray  # float64, ascending
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float

    def __post_init__(self) -> None:
        self.values.flags.writeable = False

    @property
    def spread(self) -> float:
        return self.maximum - self.minimum


def occurring_tdis(reports: Sequence[TdiReport]) -> list[TdiSpread]:
    """Distribution summary of the occurring index values per sample."""
    spreads = []
    for report in reports:
        values = np.sort(report.tdi_values)
        q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75])
        spreads.append(
            TdiSpread(
                sample_id=report.sample_id,
                values=values,
                minimum=float(values[0]),
                q1=float(q1),
                median=float(median),
                q3=float(q3),
                maximum=float(values[-1]),
            )
        )
    return spreads


def occurring_to_csv(spreads: Sequence[TdiSpread], path: str | Path) -> None:
    """Long-form dump of every occurring index value: sample,rank,TDI."""
    frames = [
        pd.DataFrame(
            {
                "sample": s.sample_id,
                "rank": np.arange(1, len(s.values) + 1),
                "TDI": s.values,
            }
        )
        for s in spreads
    ]
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)


def spread_stats_to_csv(spreads: Sequence[TdiSpread], path: str | Path) -> None:
    """Five-number summary plus spread per sample."""
    pd.DataFrame(
        {
            "sample": [s.sample_id for s in spreads],
            "min": [s.minimum for s in spreads],
            "q1": [s.q1 for s in spreads],
            "median": [s.median for s in spreads],
            "q3": [s.q3 for s in spreads],
            "max": [s.maximum for s in spreads],
            "spread": [s.spread for s in spreads],
        }
    ).to_csv(path, index=False)
