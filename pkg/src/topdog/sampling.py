"""Product sampling and the naive sold-share demand estimator.

Products are split by a seeded uniform label r in {1, 2, 3, 4} into seven
overlapping samples::

    D1 = {r in 1,2}   D2 = {r in 3,4}   D3 = {r in 1,3}   D4 = {r in 2,4}
    D5 = {r = 3}      D6 = {r in 1,2,4} D7 = all products

(D1, D2), (D3, D4) and (D5, D6) are complementary pairs; D7 is the universe.

The naive estimator of a branch's demand share is the fraction of the
sample's sold items that were sold in that branch up to a given day.  The
discrepancy between two estimates over the same branches is their L1
distance, a metric bounded by 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from .dataset import Dataset
from .errors import BranchSetMismatch, EmptyUniverse, NoSales, ZeroSupply

SAMPLE_IDS = ("D1", "D2", "D3", "D4", "D5", "D6", "D7")

LABEL_SETS: dict[str, frozenset[int]] = {
    "D1": frozenset({1, 2}),
    "D2": frozenset({3, 4}),
    "D3": frozenset({1, 3}),
    "D4": frozenset({2, 4}),
    "D5": frozenset({3}),
    "D6": frozenset({1, 2, 4}),
    "D7": frozenset({1, 2, 3, 4}),
}

COMPLEMENTARY_PAIRS = (("D1", "D2"), ("D3", "D4"), ("D5", "D6"))


@dataclass(frozen=True, eq=False)
class SamplePartition:
    """Seeded label assignment of a product universe and its seven samples."""

    products: tuple[str, ...]
    labels: np.ndarray  # int8, aligned with products, values in 1..4
    seed: int

    def __post_init__(self) -> None:
        self.labels.flags.writeable = False

    def label_of(self, product_id: str) -> int:
        return int(self.labels[self.products.index(product_id)])

    def mask(self, sample_id: str) -> np.ndarray:
        """Boolean membership of every product in the given sample."""
        return np.isin(self.labels, sorted(LABEL_SETS[sample_id]))

    def members(self, sample_id: str) -> frozenset[str]:
        products = np.asarray(self.products, dtype=object)
        return frozenset(products[self.mask(sample_id)])

    @property
    def samples(self) -> dict[str, frozenset[str]]:
        return {s: self.members(s) for s in SAMPLE_IDS}


def partition_products(products: Iterable[str], seed: int) -> SamplePartition:
    """Assign each product a uniform label in {1..4} from the given seed."""
    universe = tuple(sorted(set(products)))
    if not universe:
        raise EmptyUniverse("cannot partition an empty product universe")
    rng = np.random.default_rng(seed)
    labels = rng.integers(1, 5, size=len(universe)).astype(np.int8)
    return SamplePartition(products=universe, labels=labels, seed=seed)


@dataclass(frozen=True)
class DemandEstimate:
    """Per-branch sold-item shares of one sample up to one day."""

    day: int
    sample_id: str
    shares: Mapping[str, float]

    def __post_init__(self) -> None:
        total = float(sum(self.shares.values()))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"shares must sum to 1, got {total!r}")


def _sample_mask(dataset: Dataset, sample: Iterable[str]) -> np.ndarray:
    mask = np.zeros(dataset.n_products, dtype=bool)
    index = dataset.product_index
    for pid in sample:
        try:
            mask[index[pid]] = True
        except KeyError:
            raise KeyError(f"sample product {pid!r} not in dataset") from None
    return mask


def _branch_totals(dataset: Dataset, mask: np.ndarray, day: int) -> np.ndarray:
    rows = mask[dataset.sales_product] & (dataset.sales_day <= day)
    totals = np.bincount(
        dataset.sales_branch[rows],
        weights=dataset.sales_quantity[rows],
        minlength=dataset.n_branches,
    )
    return totals


def phi(
    dataset: Dataset,
    sample: Iterable[str],
    day: int,
    sample_id: str = "sample",
) -> DemandEstimate:
    """Naive demand-share estimate of every branch from one sample.

    Raises :class:`NoSales` when not a single item of the sample was sold
    up to the given day (a zero-sales *branch* simply gets share 0).
    """
    if day < 1:
        raise ValueError(f"day must be >= 1, got {day}")
    totals = _branch_totals(dataset, _sample_mask(dataset, sample), day)
    grand = totals.sum()
    if grand == 0:
        raise NoSales(f"no items of sample {sample_id!r} sold through day {day}")
    shares = totals / grand
    return DemandEstimate(
        day=day,
        sample_id=sample_id,
        shares=dict(zip(dataset.branches, shares.tolist())),
    )


def discrepancy(e1: DemandEstimate, e2: DemandEstimate) -> float:
    """L1 distance between two demand estimates over the same branches.

    Bounded by [0, 2]; zero exactly for identical share vectors.  Both
    estimates must describe the same day.
    """
    if set(e1.shares) != set(e2.shares):
        raise BranchSetMismatch(
            "demand estimates cover different branch sets "
            f"({len(e1.shares)} vs {len(e2.shares)} branches)"
        )
    return float(sum(abs(e1.shares[b] - e2.shares[b]) for b in e1.shares))


def supply_shares(dataset: Dataset, sample: Iterable[str]) -> dict[str, float]:
    """Per-branch share of the sample's total delivered quantity."""
    mask = _sample_mask(dataset, sample)
    totals = dataset.supply[:, mask].sum(axis=1)
    grand = totals.sum()
    if grand == 0:
        raise ZeroSupply("sample has zero total supply")
    return dict(zip(dataset.branches, (totals / grand).tolist()))


def supply_discrepancy(dataset: Dataset, sample: Iterable[str], day: int) -> float:
    """L1 distance between a sample's naive estimate and its supply shares."""
    sample = list(sample)
    estimate = phi(dataset, sample, day)
    reference = DemandEstimate(
        day=day, sample_id="supply", shares=supply_shares(dataset, sample)
    )
    return discrepancy(estimate, reference)


@dataclass(frozen=True, eq=False)
class DiscrepancyCurve:
    """Per-day discrepancies of the naive estimator for one seeded partition.

    ``delta_samples`` compares the complementary samples D1 and D2 with each
    other; the ``delta_supply_*`` columns compare D1, D2 and the universe D7
    against the matching supply shares.  Days on which a required sample had
    no sales yet hold NaN and are written as empty cells.
    """

    seed: int
    days: np.ndarray  # int64, 1..d_max
    delta_samples: np.ndarray  # float64, NaN where undefined
    delta_supply_d1: np.ndarray
    delta_supply_d2: np.ndarray
    delta_supply_all: np.ndarray

    def __post_init__(self) -> None:
        for arr in (
            self.days,
            self.delta_samples,
            self.delta_supply_d1,
            self.delta_supply_d2,
            self.delta_supply_all,
        ):
            arr.flags.writeable = False

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "day": self.days,
                "delta_samples": self.delta_samples,
                "delta_supply_D1": self.delta_supply_d1,
                "delta_supply_D2": self.delta_supply_d2,
                "delta_supply_all": self.delta_supply_all,
            }
        )

    def to_csv(self, path: str | Path) -> None:
        frame = self.frame()
        value_columns = frame.columns[1:]
        frame = frame.dropna(how="all", subset=value_columns)
        frame.to_csv(path, index=False, na_rep="")


def _cumulative_shares(
    dataset: Dataset, mask: np.ndarray, d_max: int
) -> np.ndarray:
    """float64 [n_branches, d_max] daily cumulative shares (NaN before sales)."""
    rows = mask[dataset.sales_product] & (dataset.sales_day <= d_max)
    daily = np.zeros((dataset.n_branches, d_max), dtype=np.float64)
    np.add.at(
        daily,
        (dataset.sales_branch[rows], dataset.sales_day[rows] - 1),
        dataset.sales_quantity[rows],
    )
    cumulative = np.cumsum(daily, axis=1)
    totals = cumulative.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        shares = cumulative / totals
    shares[:, totals == 0] = np.nan
    return shares


def discrepancy_curve(dataset: Dataset, seed: int, d_max: int) -> DiscrepancyCurve:
    """Track the estimator's sample-vs-sample and sample-vs-supply gaps.

    Partitions the dataset's products with the given seed, then per day
    1..d_max computes the L1 gap between the D1 and D2 estimates and between
    each of D1, D2, D7 and its supply shares.
    """
    if d_max < 1:
        raise ValueError(f"d_max must be >= 1, got {d_max}")
    if d_max > dataset.horizon:
        raise ValueError(
            f"d_max {d_max} exceeds the dataset horizon {dataset.horizon}"
        )
    partition = partition_products(dataset.products, seed)
    masks = {s: partition.mask(s) for s in ("D1", "D2", "D7")}

    shares = {s: _cumulative_shares(dataset, m, d_max) for s, m in masks.items()}
    delta_samples = np.abs(shares["D1"] - shares["D2"]).sum(axis=0)

    # a sample without supply (possible by chance on tiny universes) yields
    # absent values, same as days without sales
    deltas_supply = {}
    for s in ("D1", "D2", "D7"):
        totals = dataset.supply[:, masks[s]].sum(axis=1)
        grand = totals.sum()
        if grand == 0:
            deltas_supply[s] = np.full(d_max, np.nan)
            continue
        reference = (totals / grand)[:, None]
        deltas_supply[s] = np.abs(shares[s] - reference).sum(axis=0)

    return DiscrepancyCurve(
        seed=seed,
        days=np.arange(1, d_max + 1, dtype=np.int64),
        delta_samples=delta_samples,
        delta_supply_d1=deltas_supply["D1"],
        delta_supply_d2=deltas_supply["D2"],
        delta_supply_all=deltas_supply["D7"],
    )


def sample_share_matrix(
    dataset: Dataset, partition: SamplePartition, day: int
) -> tuple[tuple[str, ...], tuple[str, ...], np.ndarray]:
    """Naive estimator shares of every branch for all seven samples.

    Returns (branches, sample ids, float64 [n_branches, 7] share matrix).
    Used to contrast the estimator's sample stability with the index's.
    """
    if partition.products != dataset.products:
        raise ValueError("partition was built for a different product universe")
    columns = []
    for s in SAMPLE_IDS:
        totals = _branch_totals(dataset, partition.mask(s), day)
        grand = totals.sum()
        if grand == 0:
            raise NoSales(f"no items of sample {s} sold through day {day}")
        columns.append(totals / grand)
    return dataset.branches, SAMPLE_IDS, np.column_stack(columns)
