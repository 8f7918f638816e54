import numpy as np
import pytest

from topdog import Dataset, StockOutTable


def build_dataset(supply, transactions, horizon=60):
    return Dataset.from_records(supply, transactions, horizon=horizon)


def random_table(rng, n_branches=None, n_products=None, horizon=60, censor_prob=0.2):
    """Random StockOutTable with ties, censoring, and non-carried pairs."""
    n_b = n_branches or int(rng.integers(3, 12))
    n_p = n_products or int(rng.integers(1, 8))
    days = np.zeros((n_b, n_p), dtype=np.int32)
    leftover = np.zeros((n_b, n_p), dtype=np.float64)
    for p in range(n_p):
        carried = rng.random(n_b) > 0.15
        if not carried.any():
            carried[int(rng.integers(0, n_b))] = True
        # few distinct day values makes heavy ties likely
        pool = rng.integers(1, horizon + 1, size=max(2, n_b // 2))
        col = rng.choice(pool, size=n_b).astype(np.int32)
        censored = rng.random(n_b) < censor_prob
        col[censored] = 0
        col[~carried] = -1
        days[:, p] = col
        leftover[censored & carried, p] = rng.random(int((censored & carried).sum()))
    branches = tuple(f"b{i:04d}" for i in range(n_b))
    products = tuple(f"p{i:04d}" for i in range(n_p))
    return StockOutTable(
        branches=branches,
        products=products,
        horizon=horizon,
        days=days,
        leftover=leftover,
    )


def oracle_counts(table, mask=None):
    """O(|B_p|^2) reference for the win/lose counts, straight off the rule.

    A branch earns a winning point on product p when at most a third of the
    carriers stocked out no later than it did, a losing point when at most a
    third stocked out no earlier.  Comparison uses the censoring order:
    every sold-out day precedes censored, censored values tie (or are split
    by leftover fraction in remaining-fraction mode).
    """
    n_b, n_p = table.days.shape
    cols = range(n_p) if mask is None else np.flatnonzero(mask)
    wins = {b: 0 for b in table.branches}
    losses = {b: 0 for b in table.branches}

    def key(b, p):
        d = table.days[b, p]
        if d > 0:
            return (0, float(d), 0.0)
        if table.tiebreak == "remaining-fraction":
            return (1, 0.0, float(table.leftover[b, p]))
        return (1, 0.0, 0.0)

    for p in cols:
        carriers = [b for b in range(n_b) if table.days[b, p] >= 0]
        size = len(carriers)
        for b in carriers:
            kb = key(b, p)
            n_le = sum(1 for c in carriers if key(c, p) <= kb)
            n_ge = sum(1 for c in carriers if key(c, p) >= kb)
            if 3 * n_le <= size:
                wins[table.branches[b]] += 1
            if 3 * n_ge <= size:
                losses[table.branches[b]] += 1
    return {b: (wins[b], losses[b]) for b in table.branches}


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
