"""First sell-out days per (branch, product) pair.

The stock-out day of a pair is the first relative day on which cumulative
sales reach the delivered quantity.  Pairs still holding stock at the season
horizon are censored; all censored pairs share a single maximal value that
orders strictly after every observed sell-out day.  Pairs without positive
supply carry no stock-out day at all.

An optional tie-break mode refines the censored tie: pairs that kept a larger
fraction of their supply order later (they are "further" from selling out).
The stored stock-out days are unaffected; only the ordering keys change.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, total_ordering
from pathlib import Path

import numpy as np
import pandas as pd

from .dataset import Dataset

TIEBREAK_MODES = ("shared", "remaining-fraction")

_NOT_CARRIED = -1
_CENSORED_CODE = 0


@total_ordering
@dataclass(frozen=True)
class StockOutDay:
    """First sell-out day of a pair, or the shared censored value.

    ``day`` is the 1-based relative day, or ``None`` when the pair was not
    sold out by the horizon.  Values order by day; the censored value compares
    strictly greater than every observed day and equal to itself.
    """

    day: int | None

    def __post_init__(self) -> None:
        if self.day is not None and self.day < 1:
            raise ValueError(f"stock-out day must be >= 1, got {self.day}")

    @property
    def censored(self) -> bool:
        return self.day is None

    @property
    def sort_key(self) -> float:
        return np.inf if self.day is None else float(self.day)

    def __lt__(self, other: "StockOutDay") -> bool:
        if not isinstance(other, StockOutDay):
            return NotImplemented
        return self.sort_key < other.sort_key

    def __str__(self) -> str:
        return "CENSORED" if self.day is None else str(self.day)


CENSORED = StockOutDay(None)


def sold_out(day: int) -> StockOutDay:
    return StockOutDay(day)


@dataclass(frozen=True, eq=False)
class StockOutTable:
    """Stock-out days for every carried pair of one season.

    ``days[b, p]`` holds the sell-out day (1..horizon), ``0`` for censored
    pairs, and ``-1`` for pairs the branch does not carry.  ``leftover[b, p]``
    is the fraction of supply unsold at the horizon (positive exactly for
    censored pairs).
    """

    branches: tuple[str, ...]
    products: tuple[str, ...]
    horizon: int
    days: np.ndarray  # int32 [n_branches, n_products]
    leftover: np.ndarray  # float64 [n_branches, n_products]
    tiebreak: str = "shared"

    def __post_init__(self) -> None:
        if self.tiebreak not in TIEBREAK_MODES:
            raise ValueError(
                f"tiebreak must be one of {TIEBREAK_MODES}, got {self.tiebreak!r}"
            )
        self.days.flags.writeable = False
        self.leftover.flags.writeable = False

    @property
    def carried(self) -> np.ndarray:
        """bool [n_branches, n_products]: pairs with positive supply."""
        return self.days != _NOT_CARRIED

    @cached_property
    def branch_index(self) -> dict[str, int]:
        return {b: i for i, b in enumerate(self.branches)}

    @cached_property
    def product_index(self) -> dict[str, int]:
        return {p: i for i, p in enumerate(self.products)}

    def theta(self, branch_id: str, product_id: str) -> StockOutDay:
        """Stock-out day of one pair.  KeyError if the pair is not carried."""
        b = self.branch_index[branch_id]
        p = self.product_index[product_id]
        code = int(self.days[b, p])
        if code == _NOT_CARRIED:
            raise KeyError(
                f"({product_id!r}, {branch_id!r}) has no positive supply, "
                "stock-out day undefined"
            )
        return CENSORED if code == _CENSORED_CODE else StockOutDay(code)

    def carried_products(self) -> dict[str, frozenset[str]]:
        """Per branch: the products it carries (positive supply)."""
        products = np.asarray(self.products, dtype=object)
        return {
            b: frozenset(products[self.carried[i]])
            for i, b in enumerate(self.branches)
        }

    @cached_property
    def order_keys(self) -> np.ndarray:
        """float64 [n_branches, n_products] ordering keys for rank counting.

        Sold-out pairs key by their day.  Censored pairs key just past the
        horizon: all equal in "shared" mode, offset by the leftover fraction
        in "remaining-fraction" mode.  Non-carried pairs key at +inf so they
        never interfere with per-product comparisons.
        """
        keys = self.days.astype(np.float64)
        censored = self.days == _CENSORED_CODE
        keys[censored] = self.horizon + 1
        if self.tiebreak == "remaining-fraction":
            keys[censored] += self.leftover[censored]
        keys[self.days == _NOT_CARRIED] = np.inf
        keys.flags.writeable = False
        return keys

    def to_csv(self, path: str | Path) -> None:
        """Dump carried pairs as ``product_id,branch_id,theta`` rows."""
        pi, bi = np.nonzero(self.carried.T)
        codes = self.days.T[pi, bi]
        theta = codes.astype(object)
        theta[codes == _CENSORED_CODE] = "CENSORED"
        frame = pd.DataFrame(
            {
                "product_id": np.asarray(self.products, dtype=object)[pi],
                "branch_id": np.asarray(self.branches, dtype=object)[bi],
                "theta": theta,
            }
        )
        frame.to_csv(path, index=False)


def compute_stockout_days(
    dataset: Dataset, tiebreak: str = "shared"
) -> StockOutTable:
    """Derive the stock-out table of a season.

    For every pair with positive supply, the stock-out day is the smallest
    day whose cumulative sales reach the supplied quantity; pairs that never
    reach it by the horizon are censored.  Sales of one pair never interact
    with another, so the computation is one grouped cumulative-sum pass over
    the canonically sorted transactions.
    """
    n_b, n_p = dataset.n_branches, dataset.n_products
    days = np.full((n_b, n_p), _NOT_CARRIED, dtype=np.int32)
    carried = dataset.supply > 0
    days[carried] = _CENSORED_CODE

    if dataset.n_transactions:
        tp = dataset.sales_product.astype(np.int64)
        tb = dataset.sales_branch.astype(np.int64)
        flat = tp * n_b + tb
        change = np.empty(flat.size, dtype=bool)
        change[0] = True
        change[1:] = flat[1:] != flat[:-1]
        starts = np.flatnonzero(change)
        group_sizes = np.diff(np.append(starts, flat.size))

        csum = np.cumsum(dataset.sales_quantity)
        base = csum[starts] - dataset.sales_quantity[starts]
        group_id = np.cumsum(change) - 1
        within = csum - base[group_id]

        target = dataset.supply[tb, tp]
        n_below = np.add.reduceat((within < target).astype(np.int64), starts)
        reached = n_below < group_sizes
        first = starts[reached] + n_below[reached]
        sold_b = tb[first]
        sold_p = tp[first]
        keep = carried[sold_b, sold_p]
        days[sold_b[keep], sold_p[keep]] = dataset.sales_day[first][keep]

    leftover = np.zeros((n_b, n_p), dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = (dataset.supply - dataset.total_sold) / dataset.supply
    leftover[carried] = np.clip(frac[carried], 0.0, 1.0)

    return StockOutTable(
        branches=dataset.branches,
        products=dataset.products,
        horizon=dataset.horizon,
        days=days,
        leftover=leftover,
        tiebreak=tiebreak,
    )
