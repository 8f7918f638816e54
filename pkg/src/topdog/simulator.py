"""Synthetic multi-branch season simulator and the rebalancing loop.

This simulator is a *validation oracle* for the pipeline, not a fitted model
of any real market: it exists so that the index can be checked against a
known ground truth.  Every branch has a true demand weight; every product an
attractiveness multiplier.  Daily per-pair sales are Poisson draws truncated
so that cumulative sales never exceed the delivered quantity, with a
markdown schedule raising the sell rate late in the season (cut prices keep
items moving until they are gone).  Lost demand beyond the truncation is
silently discarded, exactly as real sales data would hide it.

Per-product streams draw from sub-seeds derived from (seed, product id), so
a season is bit-reproducible regardless of product evaluation order.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.stats import ConstantInputWarning, spearmanr

from .dataset import Dataset
from .errors import DegenerateTdis, TooFewBranches
from .rebalance import (
    ClusterConfig,
    SupplyPlan,
    classify,
    default_increments,
    default_intervals,
    discretize_plan,
    update_supply,
)
from .sampling import partition_products
from .stockout import compute_stockout_days
from .tdi import (
    DEFAULT_DAMPENING,
    TdiReport,
    occurring_tdis,
    relative_distribution,
    robustness_score,
    tdi_report,
)

# Tuned on the default desk-run market (200 branches x 400 products, 3 items
# per pair): early-season sales stay sparse while roughly a quarter of the
# pairs still sell out under the day-30 markdown.
DEFAULT_SELL_RATE = 0.0175
DEFAULT_MARKDOWNS = ((30, 2.0),)


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Ground truth and demand law of a synthetic market.

    Attributes:
        branch_weights: true demand share per branch; positive, sums to 1.
        n_products: products per simulated season.
        seed: master seed; per-product sub-seeds derive from it.
        horizon: season length in days.
        sell_rate: expected items per (branch, product) pair and day for a
            branch at weight 1/|B| and a product at attractiveness 1,
            before markdowns and truncation.
        a_min, a_max: attractiveness multipliers are drawn log-uniform
            from [a_min, a_max] per product.
        markdowns: (day, multiplier) pairs; the multiplier applies to all
            days after the given day.  Multipliers are >= 1 and
            nondecreasing.
        items_per_product: default per-product season total used when a
            loop builds item allocations from a plan (defaults to
            3 * |B|, i.e. three items per pair on average).
    """

    branch_weights: Mapping[str, float]
    n_products: int
    seed: int = 0
    horizon: int = 60
    sell_rate: float = DEFAULT_SELL_RATE
    a_min: float = 0.5
    a_max: float = 2.0
    markdowns: tuple[tuple[int, float], ...] = DEFAULT_MARKDOWNS
    items_per_product: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "branch_weights", dict(self.branch_weights))
        if not self.branch_weights:
            raise ValueError("need at least one branch")
        if any(w <= 0 for w in self.branch_weights.values()):
            raise ValueError("branch weights must be positive")
        total = float(sum(self.branch_weights.values()))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"branch weights must sum to 1, got {total!r}")
        if self.n_products < 0:
            raise ValueError(f"n_products must be >= 0, got {self.n_products}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.sell_rate <= 0:
            raise ValueError(f"sell_rate must be > 0, got {self.sell_rate}")
        if not 0 < self.a_min <= self.a_max:
            raise ValueError(
                f"need 0 < a_min <= a_max, got ({self.a_min}, {self.a_max})"
            )
        marks = tuple((int(d), float(m)) for d, m in self.markdowns)
        object.__setattr__(self, "markdowns", marks)
        if any(d < 1 for d, _ in marks):
            raise ValueError(f"markdown days must be >= 1, got {marks}")
        if any(d2 <= d1 for (d1, _), (d2, _) in zip(marks, marks[1:])):
            raise ValueError(f"markdown days must be ascending, got {marks}")
        mults = [m for _, m in marks]
        if any(m < 1 for m in mults):
            raise ValueError(f"markdown multipliers must be >= 1, got {marks}")
        if any(m2 < m1 for m1, m2 in zip(mults, mults[1:])):
            raise ValueError(f"markdown multipliers must be nondecreasing, got {marks}")
        if self.items_per_product is not None and self.items_per_product < 0:
            raise ValueError("items_per_product must be >= 0")

    @cached_property
    def branches(self) -> tuple[str, ...]:
        return tuple(sorted(self.branch_weights))

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.array([self.branch_weights[b] for b in self.branches])
        w.flags.writeable = False
        return w

    @cached_property
    def rate_multipliers(self) -> np.ndarray:
        """float64 [horizon]: markdown multiplier in effect on each day."""
        mult = np.ones(self.horizon)
        for day, m in self.markdowns:
            if day < self.horizon:
                mult[day:] = m
        mult.flags.writeable = False
        return mult

    @property
    def default_items_per_product(self) -> int:
        if self.items_per_product is not None:
            return self.items_per_product
        return 3 * len(self.branches)

    @classmethod
    def uniform(cls, n_branches: int, n_products: int, **kwargs) -> "SimConfig":
        """Equal true demand across generated branch ids b0000, b0001, ..."""
        if n_branches < 1:
            raise ValueError(f"need >= 1 branch, got {n_branches}")
        width = max(4, len(str(n_branches - 1)))
        weights = {f"b{i:0{width}d}": 1.0 / n_branches for i in range(n_branches)}
        return cls(branch_weights=weights, n_products=n_products, **kwargs)

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(
                {
                    "branch_weights": dict(self.branch_weights),
                    "n_products": self.n_products,
                    "seed": self.seed,
                    "horizon": self.horizon,
                    "sell_rate": self.sell_rate,
                    "a_min": self.a_min,
                    "a_max": self.a_max,
                    "markdowns": [list(m) for m in self.markdowns],
                    "items_per_product": self.items_per_product,
                },
                indent=2,
            )
            + "\n"
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "SimConfig":
        raw = json.loads(Path(path).read_text())
        if "branch_weights" in raw:
            weights = {str(k): float(v) for k, v in raw["branch_weights"].items()}
        elif "n_branches" in raw:
            n = int(raw["n_branches"])
            width = max(4, len(str(n - 1)))
            weights = {f"b{i:0{width}d}": 1.0 / n for i in range(n)}
        else:
            raise ValueError(f"{path}: need branch_weights or n_branches")
        kwargs = {
            k: raw[k]
            for k in (
                "seed",
                "horizon",
                "sell_rate",
                "a_min",
                "a_max",
                "items_per_product",
            )
            if raw.get(k) is not None
        }
        if "markdowns" in raw:
            kwargs["markdowns"] = tuple(tuple(m) for m in raw["markdowns"])
        return cls(
            branch_weights=weights, n_products=int(raw["n_products"]), **kwargs
        )


def _product_ids(n_products: int) -> tuple[str, ...]:
    width = max(4, len(str(max(n_products - 1, 0))))
    return tuple(f"p{i:0{width}d}" for i in range(n_products))


def _sub_seed(seed: int, product_id: str) -> np.random.SeedSequence:
    digest = hashlib.blake2b(product_id.encode(), digest_size=8).digest()
    return np.random.SeedSequence((seed, int.from_bytes(digest, "big")))


def _coerce_items(
    config: SimConfig, items: Mapping[tuple[str, str], int] | np.ndarray
) -> tuple[tuple[str, ...], np.ndarray]:
    """Normalize an item allocation to (product ids, int64 [B, P] matrix)."""
    branches = config.branches
    if isinstance(items, np.ndarray):
        if items.shape != (len(branches), config.n_products):
            raise ValueError(
                f"items matrix must be {(len(branches), config.n_products)}, "
                f"got {items.shape}"
            )
        return _product_ids(config.n_products), items.astype(np.int64)
    unknown = {b for b, _ in items} - set(branches)
    if unknown:
        raise ValueError(f"items reference unknown branches, e.g. {min(unknown)!r}")
    products = tuple(sorted({p for _, p in items}))
    b_index = {b: i for i, b in enumerate(branches)}
    p_index = {p: i for i, p in enumerate(products)}
    matrix = np.zeros((len(branches), len(products)), dtype=np.int64)
    for (b, p), q in items.items():
        if q < 0:
            raise ValueError(f"items must be >= 0, got {q} for ({b!r}, {p!r})")
        matrix[b_index[b], p_index[p]] = q
    return products, matrix


def simulate(
    config: SimConfig, items: Mapping[tuple[str, str], int] | np.ndarray
) -> Dataset:
    """Simulate one season's sales against a given item allocation.

    ``items`` maps (branch_id, product_id) to the delivered quantity, or is
    an int matrix over (config branches, generated product ids).  The
    returned dataset uses the allocation as its supply table and never
    oversells any pair.
    """
    products, matrix = _coerce_items(config, items)
    branches = config.branches
    n_b = len(branches)
    base = config.sell_rate * config.weights * n_b  # [B]
    mult = config.rate_multipliers  # [H]
    log_a_min, log_a_max = math.log(config.a_min), math.log(config.a_max)

    parts_p: list[np.ndarray] = []
    parts_b: list[np.ndarray] = []
    parts_d: list[np.ndarray] = []
    parts_q: list[np.ndarray] = []
    for j, pid in enumerate(products):
        rng = np.random.default_rng(_sub_seed(config.seed, pid))
        attractiveness = math.exp(rng.uniform(log_a_min, log_a_max))
        means = np.outer(base, mult) * attractiveness  # [B, H]
        draws = rng.poisson(means)
        capped = np.minimum(np.cumsum(draws, axis=1), matrix[:, j : j + 1])
        daily = np.diff(capped, axis=1, prepend=0)
        b_idx, d_idx = np.nonzero(daily)
        if b_idx.size:
            parts_p.append(np.full(b_idx.size, j, dtype=np.int32))
            parts_b.append(b_idx.astype(np.int32))
            parts_d.append((d_idx + 1).astype(np.int64))
            parts_q.append(daily[b_idx, d_idx].astype(np.int64))

    empty = (
        np.empty(0, np.int32),
        np.empty(0, np.int32),
        np.empty(0, np.int64),
        np.empty(0, np.int64),
    )
    sales_p, sales_b, sales_d, sales_q = (
        (
            np.concatenate(parts_p),
            np.concatenate(parts_b),
            np.concatenate(parts_d),
            np.concatenate(parts_q),
        )
        if parts_p
        else empty
    )
    return Dataset(
        branches=branches,
        products=products,
        supply=matrix,
        listed=np.ones_like(matrix, dtype=bool),
        sales_product=sales_p,
        sales_branch=sales_b,
        sales_day=sales_d,
        sales_quantity=sales_q,
        horizon=config.horizon,
    )


def plan_items(
    config: SimConfig, plan: SupplyPlan, items_per_product: int | None = None
) -> np.ndarray:
    """Item matrix giving every product the same plan-apportioned allocation."""
    if plan.branches != config.branches:
        raise ValueError("plan covers a different branch set than the config")
    total = (
        config.default_items_per_product
        if items_per_product is None
        else items_per_product
    )
    allocation = discretize_plan(plan, total)
    column = np.array([allocation[b] for b in config.branches], dtype=np.int64)
    return np.tile(column[:, None], (1, config.n_products))


def group_factor_plan(
    config: SimConfig, factors: Sequence[float]
) -> tuple[SupplyPlan, np.ndarray]:
    """Mis-supply scenario: contiguous branch groups scaled by given factors.

    Branches (sorted) are split into len(factors) nearly equal groups; group
    g's true share is multiplied by factors[g], then shares renormalize.
    Returns the plan and the per-branch factor array.  Factor 1 everywhere
    reproduces the true weights: the neutral, perfectly informed plan.
    """
    if not factors:
        raise ValueError("need at least one factor")
    if any(f <= 0 for f in factors):
        raise ValueError(f"factors must be positive, got {factors}")
    n_b = len(config.branches)
    group = np.array_split(np.arange(n_b), len(factors))
    per_branch = np.empty(n_b)
    for g, idx in enumerate(group):
        per_branch[idx] = factors[g]
    raw = config.weights * per_branch
    return (
        SupplyPlan(
            branches=config.branches,
            shares=raw / raw.sum(),
            provenance="scenario",
        ),
        per_branch,
    )


def evaluate_recovery(
    report: TdiReport,
    config: SimConfig,
    items: Mapping[tuple[str, str], int] | np.ndarray,
) -> float:
    """Spearman rank correlation of the index with true undersupply.

    The ground-truth undersupply ratio of a branch is its true demand weight
    divided by its share of the delivered items; a useful index ranks
    branches the same way.  Returns a value in [-1, 1], or nan when either
    side is constant (e.g. perfectly proportional supply leaves nothing to
    rank).
    """
    if report.branches != config.branches:
        raise ValueError("report covers a different branch set than the config")
    if len(config.branches) < 3:
        raise TooFewBranches(
            f"recovery evaluation needs >= 3 branches, got {len(config.branches)}"
        )
    _, matrix = _coerce_items(config, items)
    supply_totals = matrix.sum(axis=1).astype(np.float64)
    shares = supply_totals / supply_totals.sum()
    with np.errstate(divide="ignore"):
        ratio = config.weights / shares
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstantInputWarning)
        return float(spearmanr(report.tdi_values, ratio).statistic)


@dataclass(frozen=True, eq=False)
class RoundRecord:
    """Outcome of one closed-loop round (measured, then replanned)."""

    round_index: int
    plan: SupplyPlan  # plan after this round's update
    gap: float  # L1 distance of that plan to the true weights
    report: TdiReport  # universe-sample report of the measured season
    score: float  # robustness score of the season's relative matrix
    spread: float  # max - min of occurring universe index values
    recovery: float  # Spearman correlation with true undersupply


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Plans and diagnostics of a closed rebalancing loop."""

    initial_plan: SupplyPlan
    initial_gap: float
    rounds: tuple[RoundRecord, ...]

    @property
    def gaps(self) -> np.ndarray:
        """float64 [rounds + 1]: L1 gap to truth before and after each round."""
        return np.array([self.initial_gap] + [r.gap for r in self.rounds])

    @property
    def final_plan(self) -> SupplyPlan:
        return self.rounds[-1].plan if self.rounds else self.initial_plan

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "round": [r.round_index for r in self.rounds],
                "gap": [r.gap for r in self.rounds],
                "score": [r.score for r in self.rounds],
                "spread": [r.spread for r in self.rounds],
                "recovery": [r.recovery for r in self.rounds],
            }
        )

    def to_csv(self, path: str | Path) -> None:
        self.frame().to_csv(path, index=False)


def _gap(plan: SupplyPlan, weights: np.ndarray) -> float:
    return float(np.abs(plan.shares - weights).sum())


def closed_loop(
    config: SimConfig,
    initial_plan: SupplyPlan,
    cluster_config: ClusterConfig | None = None,
    rounds: int = 10,
    dampening: float = DEFAULT_DAMPENING,
    increment_scale: float = 0.1,
    increment_decay: float = 1.0,
    items_per_product: int | None = None,
) -> Trajectory:
    """Iterate simulate -> index -> classify -> replan for several rounds.

    Each round apportions the current plan into items, simulates a fresh
    season (new sub-seeds, same ground truth), indexes it on the universe
    sample, and updates the plan through the cluster increments.  With a
    ``cluster_config`` of ``None``, boundaries are re-derived per round from
    the occurring index values (equal-count clusters) and increments default
    to (-d, 0, +d) with d = increment_scale/|B|, shrunk by increment_decay
    each round.  A round whose index values are too degenerate to cluster
    leaves the plan unchanged.
    """
    if rounds < 1:
        raise ValueError(f"need >= 1 round, got {rounds}")
    if initial_plan.branches != config.branches:
        raise ValueError("plan covers a different branch set than the config")
    round_seeds = np.random.default_rng(config.seed).integers(
        0, 2**63, size=rounds
    )
    plan = initial_plan
    weights = config.weights
    records = []
    for t in range(1, rounds + 1):
        season = replace(config, seed=int(round_seeds[t - 1]))
        items = plan_items(season, plan, items_per_product)
        dataset = simulate(season, items)
        table = compute_stockout_days(dataset)
        partition = partition_products(dataset.products, seed=season.seed)
        reports = tdi_report(table, partition, dampening)
        universe = reports[-1]
        score = robustness_score(relative_distribution(reports))
        spread = occurring_tdis([universe])[0].spread
        recovery = evaluate_recovery(universe, season, items)

        if cluster_config is not None:
            round_config = cluster_config
        else:
            scale = increment_scale * increment_decay ** (t - 1)
            try:
                boundaries = default_intervals(universe, 3)
            except DegenerateTdis:
                boundaries = None
            round_config = (
                ClusterConfig(
                    boundaries=boundaries,
                    increments=default_increments(len(weights), 3, scale),
                )
                if boundaries is not None
                else None
            )
        if round_config is not None:
            assignment = classify(universe, round_config)
            plan = update_supply(plan, assignment, round_config)

        records.append(
            RoundRecord(
                round_index=t,
                plan=plan,
                gap=_gap(plan, weights),
                report=universe,
                score=score,
                spread=spread,
                recovery=recovery,
            )
        )
    return Trajectory(
        initial_plan=initial_plan,
        initial_gap=_gap(initial_plan, weights),
        rounds=tuple(records),
    )
