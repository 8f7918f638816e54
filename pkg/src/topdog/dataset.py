"""Season sales data: types, CSV ingestion, validation, and serialization.

A season is described by two delimited tables.  The supply table fixes the
universe: every branch and product id the season knows about appears there,
along with the item count delivered to each (branch, product) pair.  The
sales table records daily sales per pair, with days counted relative to the
product's first day on sale (day 1).  Calendar-dated sales files are
supported through a launch-date sidecar that maps each product to its launch
day; dates are normalized to relative days on ingestion.

Datasets are stored in a canonical columnar form: transactions are summed
per (product, branch, day) and sorted, so loading the same rows in any
order yields an identical :class:`Dataset`, and a write/reload round trip
is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import pandas as pd

from .errors import (
    DayBeyondHorizon,
    MalformedRow,
    OversoldProduct,
    TopDogError,
    UnknownPair,
)

DEFAULT_HORIZON = 60

SALES_COLUMNS = ("product_id", "branch_id", "day", "quantity")
SUPPLY_COLUMNS = ("product_id", "branch_id", "quantity")
LAUNCH_COLUMNS = ("product_id", "launch_date")


@dataclass(frozen=True)
class Transaction:
    """Items of one product sold in one branch on one (relative) day.

    Attributes:
        product_id: opaque product identifier.
        branch_id: opaque branch identifier.
        day: 1-based day relative to the product's launch.
        quantity: number of items sold, at least 1.
    """

    product_id: str
    branch_id: str
    day: int
    quantity: int

    def __post_init__(self) -> None:
        if self.day < 1:
            raise ValueError(f"transaction day must be >= 1, got {self.day}")
        if self.quantity < 1:
            raise ValueError(
                f"transaction quantity must be >= 1, got {self.quantity}"
            )


@dataclass(frozen=True)
class SupplyRecord:
    """Item count delivered to one (branch, product) pair for the season."""

    product_id: str
    branch_id: str
    quantity: int

    def __post_init__(self) -> None:
        if self.quantity < 0:
            raise ValueError(
                f"supply quantity must be >= 0, got {self.quantity}"
            )


@dataclass(frozen=True)
class ValidationIssue:
    """One invariant violation (error) or advisory finding (warning)."""

    severity: str  # "error" | "warning"
    code: str
    locator: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking a dataset against its invariants."""

    issues: tuple[ValidationIssue, ...]

    @property
    def errors(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "error")

    @property
    def warnings(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "warning")

    @property
    def error_count(self) -> int:
        return len(self.errors)

    @property
    def warning_count(self) -> int:
        return len(self.warnings)

    @property
    def ok(self) -> bool:
        return self.error_count == 0

    def lines(self) -> list[str]:
        out = [f"errors: {self.error_count}  warnings: {self.warning_count}"]
        out += [f"{i.severity}: {i.locator}: {i.message}" for i in self.issues]
        return out


# Maps a validation error code to the exception strict loading raises.
_ERROR_CLASSES: dict[str, type[TopDogError]] = {
    "unknown_pair": UnknownPair,
    "day_beyond_horizon": DayBeyondHorizon,
    "oversold": OversoldProduct,
    "bad_day": MalformedRow,
    "bad_quantity": MalformedRow,
    "negative_supply": MalformedRow,
}


@dataclass(frozen=True, eq=False)
class Dataset:
    """One season of supply and sales over fixed branch and product sets.

    The branch and product axes are exactly the sorted ids occurring in the
    supply table.  ``supply[b, p]`` holds the delivered quantity and
    ``listed[b, p]`` marks pairs that had an explicit supply record (a pair
    can be listed with quantity zero).  Sales are stored columnar, summed
    per (product, branch, day) and sorted by that key.
    """

    branches: tuple[str, ...]
    products: tuple[str, ...]
    supply: np.ndarray  # int64 [n_branches, n_products]
    listed: np.ndarray  # bool  [n_branches, n_products]
    sales_product: np.ndarray  # int32 product index per transaction group
    sales_branch: np.ndarray  # int32 branch index
    sales_day: np.ndarray  # int64 relative day
    sales_quantity: np.ndarray  # int64 summed quantity
    horizon: int

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        for arr in (
            self.supply,
            self.listed,
            self.sales_product,
            self.sales_branch,
            self.sales_day,
            self.sales_quantity,
        ):
            arr.flags.writeable = False

    # -- sizes and lookups ---------------------------------------------------

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @property
    def n_products(self) -> int:
        return len(self.products)

    @property
    def n_transactions(self) -> int:
        return int(self.sales_quantity.size)

    @cached_property
    def branch_index(self) -> dict[str, int]:
        return {b: i for i, b in enumerate(self.branches)}

    @cached_property
    def product_index(self) -> dict[str, int]:
        return {p: i for i, p in enumerate(self.products)}

    @cached_property
    def total_sold(self) -> np.ndarray:
        """int64 [n_branches, n_products]: items sold over the whole season."""
        total = np.zeros((self.n_branches, self.n_products), dtype=np.int64)
        np.add.at(
            total, (self.sales_branch, self.sales_product), self.sales_quantity
        )
        total.flags.writeable = False
        return total

    def iter_transactions(self) -> Iterator[Transaction]:
        for p, b, d, q in zip(
            self.sales_product, self.sales_branch, self.sales_day, self.sales_quantity
        ):
            yield Transaction(self.products[p], self.branches[b], int(d), int(q))

    @property
    def transactions(self) -> list[Transaction]:
        return list(self.iter_transactions())

    def supply_records(self) -> Iterator[SupplyRecord]:
        pi, bi = np.nonzero(self.listed.T)
        for p, b in zip(pi, bi):
            yield SupplyRecord(
                self.products[p], self.branches[b], int(self.supply[b, p])
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.branches == other.branches
            and self.products == other.products
            and self.horizon == other.horizon
            and np.array_equal(self.supply, other.supply)
            and np.array_equal(self.listed, other.listed)
            and np.array_equal(self.sales_product, other.sales_product)
            and np.array_equal(self.sales_branch, other.sales_branch)
            and np.array_equal(self.sales_day, other.sales_day)
            and np.array_equal(self.sales_quantity, other.sales_quantity)
        )

    # -- construction ----------------------------------------------------------

    @classmethod
    def from_records(
        cls,
        supply: Iterable[SupplyRecord | tuple[str, str, int]],
        transactions: Iterable[Transaction | tuple[str, str, int, int]],
        horizon: int = DEFAULT_HORIZON,
    ) -> "Dataset":
        """Build a dataset from in-memory records.

        Field-level invariants are enforced by the record types; dataset-level
        invariants (horizon bound, oversell, unlisted pairs) are *not* checked
        here so that :func:`validate_dataset` can report them.  Transactions
        whose ids do not occur in the supply records at all cannot be
        represented and raise :class:`UnknownPair` immediately.
        """
        supply_records = [
            r if isinstance(r, SupplyRecord) else SupplyRecord(*r) for r in supply
        ]
        txns = [
            t if isinstance(t, Transaction) else Transaction(*t) for t in transactions
        ]
        branches = tuple(sorted({r.branch_id for r in supply_records}))
        products = tuple(sorted({r.product_id for r in supply_records}))
        b_index = {b: i for i, b in enumerate(branches)}
        p_index = {p: i for i, p in enumerate(products)}

        supply_matrix = np.zeros((len(branches), len(products)), dtype=np.int64)
        listed = np.zeros_like(supply_matrix, dtype=bool)
        for r in supply_records:
            b, p = b_index[r.branch_id], p_index[r.product_id]
            if listed[b, p]:
                raise MalformedRow(
                    f"duplicate supply record for ({r.product_id}, {r.branch_id})"
                )
            listed[b, p] = True
            supply_matrix[b, p] = r.quantity

        for t in txns:
            if t.branch_id not in b_index or t.product_id not in p_index:
                raise UnknownPair(
                    f"transaction ({t.product_id}, {t.branch_id}) references ids "
                    "absent from the supply table"
                )
        p_codes = np.array([p_index[t.product_id] for t in txns], dtype=np.int32)
        b_codes = np.array([b_index[t.branch_id] for t in txns], dtype=np.int32)
        days = np.array([t.day for t in txns], dtype=np.int64)
        qtys = np.array([t.quantity for t in txns], dtype=np.int64)
        p_codes, b_codes, days, qtys = _canonical_sales(p_codes, b_codes, days, qtys)
        return cls(
            branches=branches,
            products=products,
            supply=supply_matrix,
            listed=listed,
            sales_product=p_codes,
            sales_branch=b_codes,
            sales_day=days,
            sales_quantity=qtys,
            horizon=horizon,
        )


def _canonical_sales(
    p_codes: np.ndarray, b_codes: np.ndarray, days: np.ndarray, qtys: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Sum quantities per (product, branch, day) and sort by that key."""
    if p_codes.size == 0:
        return (
            np.empty(0, np.int32),
            np.empty(0, np.int32),
            np.empty(0, np.int64),
            np.empty(0, np.int64),
        )
    order = np.lexsort((days, b_codes, p_codes))
    p_codes, b_codes, days, qtys = (
        p_codes[order],
        b_codes[order],
        days[order],
        qtys[order],
    )
    key_change = np.empty(p_codes.size, dtype=bool)
    key_change[0] = True
    key_change[1:] = (
        (p_codes[1:] != p_codes[:-1])
        | (b_codes[1:] != b_codes[:-1])
        | (days[1:] != days[:-1])
    )
    starts = np.flatnonzero(key_change)
    sums = np.add.reduceat(qtys, starts)
    return (
        p_codes[starts].astype(np.int32),
        b_codes[starts].astype(np.int32),
        days[starts],
        sums.astype(np.int64),
    )


# --- CSV parsing -------------------------------------------------------------


def _read_frame(path: str | Path, columns: tuple[str, ...]) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        return pd.DataFrame({c: pd.Series(dtype=str) for c in columns})
    except pd.errors.ParserError as exc:
        raise MalformedRow(f"{path}: {exc}") from None
    if tuple(frame.columns) != columns:
        if set(frame.columns) != set(columns):
            raise MalformedRow(
                f"{path}: expected columns {list(columns)}, got {list(frame.columns)}"
            )
        frame = frame[list(columns)]
    return frame


def _require_ids(frame: pd.DataFrame, path: Path, column: str) -> None:
    values = frame[column]
    bad = values.isna() | (values == "")
    if bad.any():
        row = int(bad.idxmax()) + 2
        raise MalformedRow(f"{path} row {row}: empty {column}")


def _coerce_int(
    frame: pd.DataFrame, path: Path, column: str, minimum: int
) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce")
    fractional = values.notna() & (values % 1 != 0)
    bad = values.isna() | fractional
    if bad.any():
        row = int(bad.idxmax()) + 2
        raw = frame[column].iloc[int(bad.idxmax())]
        raise MalformedRow(f"{path} row {row}: {column} must be an integer, got {raw!r}")
    ints = values.to_numpy(dtype=np.int64)
    low = ints < minimum
    if low.any():
        row = int(np.argmax(low)) + 2
        raise MalformedRow(
            f"{path} row {row}: {column} must be >= {minimum}, got {ints[np.argmax(low)]}"
        )
    return ints


def _relative_days(
    sales: pd.DataFrame, path: Path, launch_dates_path: str | Path
) -> np.ndarray:
    """Convert a calendar-dated day column to relative days via the sidecar."""
    launch_path = Path(launch_dates_path)
    sidecar = _read_frame(launch_path, LAUNCH_COLUMNS)
    _require_ids(sidecar, launch_path, "product_id")
    if sidecar["product_id"].duplicated().any():
        dup = sidecar["product_id"][sidecar["product_id"].duplicated()].iloc[0]
        raise MalformedRow(f"{launch_path}: duplicate launch date for product {dup!r}")
    launch = pd.to_datetime(
        sidecar["launch_date"], format="%Y-%m-%d", errors="coerce"
    )
    if launch.isna().any():
        row = int(launch.isna().idxmax()) + 2
        raise MalformedRow(
            f"{launch_path} row {row}: launch_date must be an ISO-8601 date"
        )
    launch_by_product = pd.Series(
        launch.to_numpy(), index=sidecar["product_id"].to_numpy()
    )

    dates = pd.to_datetime(sales["day"], format="%Y-%m-%d", errors="coerce")
    if dates.isna().any():
        row = int(dates.isna().idxmax()) + 2
        raise MalformedRow(
            f"{path} row {row}: day must be an ISO-8601 date when a launch-date "
            "sidecar is used"
        )
    known = sales["product_id"].isin(launch_by_product.index)
    if not known.all():
        row = int((~known).idxmax()) + 2
        pid = sales["product_id"].iloc[int((~known).idxmax())]
        raise MalformedRow(
            f"{path} row {row}: no launch date for product {pid!r}"
        )
    starts = launch_by_product.loc[sales["product_id"]].to_numpy()
    days = (dates.to_numpy() - starts).astype("timedelta64[D]").astype(np.int64) + 1
    if (days < 1).any():
        row = int(np.argmax(days < 1)) + 2
        raise MalformedRow(f"{path} row {row}: sale date precedes product launch")
    return days


def _parse_supply(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    frame = _read_frame(path, SUPPLY_COLUMNS)
    _require_ids(frame, path, "product_id")
    _require_ids(frame, path, "branch_id")
    quantity = _coerce_int(frame, path, "quantity", minimum=0)
    dup = frame.duplicated(subset=["product_id", "branch_id"])
    if dup.any():
        row = int(dup.idxmax()) + 2
        raise MalformedRow(
            f"{path} row {row}: duplicate supply record for "
            f"({frame['product_id'].iloc[int(dup.idxmax())]!r}, "
            f"{frame['branch_id'].iloc[int(dup.idxmax())]!r})"
        )
    return pd.DataFrame(
        {
            "product_id": frame["product_id"],
            "branch_id": frame["branch_id"],
            "quantity": quantity,
        }
    )


def _parse_sales(
    path: str | Path, launch_dates_path: str | Path | None
) -> pd.DataFrame:
    path = Path(path)
    frame = _read_frame(path, SALES_COLUMNS)
    if frame.empty:
        return pd.DataFrame(
            {
                "product_id": pd.Series(dtype=str),
                "branch_id": pd.Series(dtype=str),
                "day": pd.Series(dtype=np.int64),
                "quantity": pd.Series(dtype=np.int64),
            }
        )
    _require_ids(frame, path, "product_id")
    _require_ids(frame, path, "branch_id")
    if launch_dates_path is not None:
        days = _relative_days(frame, path, launch_dates_path)
    else:
        days = _coerce_int(frame, path, "day", minimum=1)
    quantity = _coerce_int(frame, path, "quantity", minimum=1)
    return pd.DataFrame(
        {
            "product_id": frame["product_id"],
            "branch_id": frame["branch_id"],
            "day": days,
            "quantity": quantity,
        }
    )


def _assemble(
    supply: pd.DataFrame, sales: pd.DataFrame, horizon: int, sales_name: str
) -> tuple[Dataset, ValidationReport]:
    """Build a dataset from parsed frames, collecting invariant violations.

    Transactions whose ids are entirely absent from the supply table cannot
    be represented; they are reported and dropped.
    """
    branches = tuple(sorted(supply["branch_id"].unique()))
    products = tuple(sorted(supply["product_id"].unique()))
    n_b, n_p = len(branches), len(products)

    supply_matrix = np.zeros((n_b, n_p), dtype=np.int64)
    listed = np.zeros((n_b, n_p), dtype=bool)
    sb = pd.Categorical(supply["branch_id"], categories=branches).codes
    sp = pd.Categorical(supply["product_id"], categories=products).codes
    supply_matrix[sb, sp] = supply["quantity"].to_numpy()
    listed[sb, sp] = True

    issues: list[ValidationIssue] = []

    tb = pd.Categorical(sales["branch_id"], categories=branches).codes.astype(np.int32)
    tp = pd.Categorical(sales["product_id"], categories=products).codes.astype(
        np.int32
    )
    unknown_ids = (tb < 0) | (tp < 0)
    unlisted = ~unknown_ids.copy()
    unlisted[~unknown_ids] = ~listed[tb[~unknown_ids], tp[~unknown_ids]]
    for idx in np.flatnonzero(unknown_ids | unlisted):
        issues.append(
            ValidationIssue(
                "error",
                "unknown_pair",
                f"{sales_name} row {idx + 2}",
                f"transaction ({sales['product_id'].iloc[idx]!r}, "
                f"{sales['branch_id'].iloc[idx]!r}) has no supply record",
            )
        )

    keep = ~unknown_ids
    tb, tp = tb[keep], tp[keep]
    days = sales["day"].to_numpy(dtype=np.int64)[keep]
    qtys = sales["quantity"].to_numpy(dtype=np.int64)[keep]
    row_numbers = np.flatnonzero(keep) + 2

    beyond = days > horizon
    for pos in np.flatnonzero(beyond):
        issues.append(
            ValidationIssue(
                "error",
                "day_beyond_horizon",
                f"{sales_name} row {row_numbers[pos]}",
                f"day {days[pos]} exceeds the horizon {horizon}",
            )
        )

    tp_c, tb_c, days_c, qtys_c = _canonical_sales(tp, tb, days, qtys)
    dataset = Dataset(
        branches=branches,
        products=products,
        supply=supply_matrix,
        listed=listed,
        sales_product=tp_c,
        sales_branch=tb_c,
        sales_day=days_c,
        sales_quantity=qtys_c,
        horizon=horizon,
    )

    over = dataset.total_sold > dataset.supply
    for b, p in zip(*np.nonzero(over)):
        issues.append(
            ValidationIssue(
                "error",
                "oversold",
                f"pair ({products[p]!r}, {branches[b]!r})",
                f"sold {int(dataset.total_sold[b, p])} of "
                f"{int(dataset.supply[b, p])} supplied",
            )
        )

    for b in np.flatnonzero(supply_matrix.sum(axis=1) == 0):
        issues.append(
            ValidationIssue(
                "warning",
                "zero_supply_branch",
                f"branch {branches[b]!r}",
                "branch has zero total supply and contributes nothing",
            )
        )

    return dataset, ValidationReport(tuple(issues))


def load_dataset(
    sales_path: str | Path,
    supply_path: str | Path,
    horizon: int = DEFAULT_HORIZON,
    launch_dates_path: str | Path | None = None,
) -> Dataset:
    """Load and strictly validate a season from its two CSV files.

    Raises the error class of the first invariant violation found
    (:class:`MalformedRow`, :class:`UnknownPair`, :class:`DayBeyondHorizon`,
    or :class:`OversoldProduct`).  On success the returned dataset satisfies
    every dataset invariant.
    """
    dataset, report = inspect_files(
        sales_path, supply_path, horizon=horizon, launch_dates_path=launch_dates_path
    )
    for issue in report.errors:
        raise _ERROR_CLASSES[issue.code](f"{issue.locator}: {issue.message}")
    return dataset


def inspect_files(
    sales_path: str | Path,
    supply_path: str | Path,
    horizon: int = DEFAULT_HORIZON,
    launch_dates_path: str | Path | None = None,
) -> tuple[Dataset, ValidationReport]:
    """Permissive variant of :func:`load_dataset` used for validation runs.

    Structural damage (unreadable CSV, bad types) still raises
    :class:`MalformedRow`; dataset-level violations are returned in the
    report instead of raised, alongside the (possibly invalid) dataset.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    supply = _parse_supply(supply_path)
    sales = _parse_sales(sales_path, launch_dates_path)
    return _assemble(supply, sales, horizon, Path(sales_path).name)


def validate_dataset(dataset: Dataset) -> ValidationReport:
    """Check every dataset invariant, returning a report of violations.

    A dataset produced by a successful :func:`load_dataset` call always
    yields a report with zero errors.
    """
    issues: list[ValidationIssue] = []

    def _locate(i: int) -> str:
        return (
            f"sales[product={dataset.products[dataset.sales_product[i]]!r}, "
            f"branch={dataset.branches[dataset.sales_branch[i]]!r}, "
            f"day={int(dataset.sales_day[i])}]"
        )

    for i in np.flatnonzero(dataset.sales_day < 1):
        issues.append(
            ValidationIssue("error", "bad_day", _locate(i), "day must be >= 1")
        )
    for i in np.flatnonzero(dataset.sales_quantity < 1):
        issues.append(
            ValidationIssue(
                "error", "bad_quantity", _locate(i), "quantity must be >= 1"
            )
        )
    for i in np.flatnonzero(dataset.sales_day > dataset.horizon):
        issues.append(
            ValidationIssue(
                "error",
                "day_beyond_horizon",
                _locate(i),
                f"day {int(dataset.sales_day[i])} exceeds the horizon "
                f"{dataset.horizon}",
            )
        )
    for i in np.flatnonzero(
        ~dataset.listed[dataset.sales_branch, dataset.sales_product]
    ):
        issues.append(
            ValidationIssue(
                "error",
                "unknown_pair",
                _locate(i),
                "transaction has no supply record",
            )
        )
    if (dataset.supply < 0).any():
        for b, p in zip(*np.nonzero(dataset.supply < 0)):
            issues.append(
                ValidationIssue(
                    "error",
                    "negative_supply",
                    f"pair ({dataset.products[p]!r}, {dataset.branches[b]!r})",
                    "supply quantity must be >= 0",
                )
            )
    over = dataset.total_sold > dataset.supply
    for b, p in zip(*np.nonzero(over)):
        issues.append(
            ValidationIssue(
                "error",
                "oversold",
                f"pair ({dataset.products[p]!r}, {dataset.branches[b]!r})",
                f"sold {int(dataset.total_sold[b, p])} of "
                f"{int(dataset.supply[b, p])} supplied",
            )
        )
    for b in np.flatnonzero(dataset.supply.sum(axis=1) == 0):
        issues.append(
            ValidationIssue(
                "warning",
                "zero_supply_branch",
                f"branch {dataset.branches[b]!r}",
                "branch has zero total supply and contributes nothing",
            )
        )
    return ValidationReport(tuple(issues))


def write_dataset(
    dataset: Dataset, sales_path: str | Path, supply_path: str | Path
) -> None:
    """Serialize a dataset back to the two CSV schemas (canonical order).

    Reloading the written files with the same horizon reproduces the dataset
    exactly.
    """
    products = np.asarray(dataset.products, dtype=object)
    branches = np.asarray(dataset.branches, dtype=object)

    pi, bi = np.nonzero(dataset.listed.T)
    supply_frame = pd.DataFrame(
        {
            "product_id": products[pi],
            "branch_id": branches[bi],
            "quantity": dataset.supply.T[pi, bi],
        }
    )
    supply_frame.to_csv(supply_path, index=False)

    sales_frame = pd.DataFrame(
        {
            "product_id": products[dataset.sales_product],
            "branch_id": branches[dataset.sales_branch],
            "day": dataset.sales_day,
            "quantity": dataset.sales_quantity,
        }
    )
    sales_frame.to_csv(sales_path, index=False)
