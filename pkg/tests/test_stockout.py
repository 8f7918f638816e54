import numpy as np
import pytest

from topdog import (
    CENSORED,
    StockOutDay,
    compute_stockout_days,
    sold_out,
)

from conftest import build_dataset


def theta(dataset, branch, product, **kwargs):
    return compute_stockout_days(dataset, **kwargs).theta(branch, product)


class TestStockOutDayOrdering:
    def test_sold_out_days_order_by_day(self):
        assert sold_out(3) < sold_out(4)
        assert not sold_out(4) < sold_out(4)

    def test_sold_out_before_censored(self):
        assert sold_out(60) < CENSORED
        assert not CENSORED < sold_out(60)

    def test_censored_values_tie(self):
        assert CENSORED == StockOutDay(None)
        assert not CENSORED < StockOutDay(None)

    def test_string_forms(self):
        assert str(sold_out(7)) == "7"
        assert str(CENSORED) == "CENSORED"


class TestComputeStockoutDays:
    def test_third_item_sells_on_day_four(self):
        ds = build_dataset(
            [("p1", "b1", 3)],
            [("p1", "b1", 1, 1), ("p1", "b1", 2, 1), ("p1", "b1", 4, 1)],
        )
        assert theta(ds, "b1", "p1") == sold_out(4)

    def test_single_transaction_clears_supply(self):
        ds = build_dataset([("p1", "b1", 2)], [("p1", "b1", 1, 2)])
        assert theta(ds, "b1", "p1") == sold_out(1)

    def test_partial_sales_censored(self):
        ds = build_dataset(
            [("p1", "b1", 3)], [("p1", "b1", 5, 1), ("p1", "b1", 30, 1)]
        )
        assert theta(ds, "b1", "p1") == CENSORED

    def test_no_sales_censored(self):
        ds = build_dataset([("p1", "b1", 3)], [])
        assert theta(ds, "b1", "p1") == CENSORED

    def test_zero_supply_pair_not_carried(self):
        ds = build_dataset([("p1", "b1", 0), ("p1", "b2", 1)], [("p1", "b2", 2, 1)])
        table = compute_stockout_days(ds)
        with pytest.raises(KeyError):
            table.theta("b1", "p1")
        assert table.theta("b2", "p1") == sold_out(2)
        carried = table.carried_products()
        assert carried["b1"] == frozenset()
        assert carried["b2"] == frozenset({"p1"})

    def test_cumulative_reaches_supply_exactly_on_theta(self, rng):
        for _ in range(50):
            supply = int(rng.integers(1, 8))
            n_tx = int(rng.integers(1, 10))
            days = sorted(rng.integers(1, 61, size=n_tx).tolist())
            qtys = rng.integers(1, 4, size=n_tx).tolist()
            total = sum(qtys)
            if total < supply:
                continue
            tx = [("p1", "b1", d, q) for d, q in zip(days, qtys)]
            ds = build_dataset([("p1", "b1", supply + 0)], tx)
            day = theta(ds, "b1", "p1")
            cum = 0
            by_day = {}
            for d, q in zip(days, qtys):
                by_day[d] = by_day.get(d, 0) + q
            running, first = 0, None
            for d in sorted(by_day):
                running += by_day[d]
                if running >= supply:
                    first = d
                    break
            assert day == sold_out(first)

    def test_monotone_under_added_transaction(self, rng):
        base_tx = [("p1", "b1", 10, 1), ("p1", "b1", 20, 1)]
        ds = build_dataset([("p1", "b1", 3)], base_tx)
        before = theta(ds, "b1", "p1")
        for day in (1, 15, 25, 60):
            more = build_dataset([("p1", "b1", 3)], base_tx + [("p1", "b1", day, 1)])
            after = theta(more, "b1", "p1")
            assert after <= before

    def test_transaction_order_irrelevant(self, rng):
        tx = [
            ("p1", "b1", 3, 1),
            ("p1", "b1", 1, 2),
            ("p2", "b1", 2, 1),
            ("p1", "b2", 2, 3),
        ]
        supply = [("p1", "b1", 3), ("p2", "b1", 1), ("p1", "b2", 3)]
        tables = []
        for order in ([0, 1, 2, 3], [3, 2, 1, 0], [1, 3, 0, 2]):
            ds = build_dataset(supply, [tx[i] for i in order])
            tables.append(compute_stockout_days(ds))
        assert np.array_equal(tables[0].days, tables[1].days)
        assert np.array_equal(tables[0].days, tables[2].days)


class TestTiebreakModes:
    def test_shared_mode_censored_keys_equal(self):
        ds = build_dataset(
            [("p1", "b1", 10), ("p1", "b2", 2)],
            [("p1", "b1", 1, 9), ("p1", "b2", 1, 1)],
        )
        table = compute_stockout_days(ds, tiebreak="shared")
        keys = table.order_keys
        assert keys[0, 0] == keys[1, 0]

    def test_remaining_fraction_orders_censored(self):
        # b1 left 10% unsold, b2 50%: b1 stocks out "earlier" among censored
        ds = build_dataset(
            [("p1", "b1", 10), ("p1", "b2", 2)],
            [("p1", "b1", 1, 9), ("p1", "b2", 1, 1)],
        )
        table = compute_stockout_days(ds, tiebreak="remaining-fraction")
        keys = table.order_keys
        assert keys[0, 0] < keys[1, 0]

    def test_unknown_mode_rejected(self):
        ds = build_dataset([("p1", "b1", 1)], [])
        with pytest.raises(ValueError):
            compute_stockout_days(ds, tiebreak="nope")


class TestTableCsv:
    def test_dump_schema_and_censored_literal(self, tmp_path):
        ds = build_dataset(
            [("p1", "b1", 1), ("p1", "b2", 5), ("p2", "b1", 0)],
            [("p1", "b1", 4, 1)],
        )
        table = compute_stockout_days(ds)
        path = tmp_path / "stockouts.csv"
        table.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "product_id,branch_id,theta"
        body = set(lines[1:])
        assert body == {"p1,b1,4", "p1,b2,CENSORED"}
