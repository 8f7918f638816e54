"""Command line interface.

Subcommands cover the full pipeline: ``validate`` checks input tables,
``discrepancy`` tracks the naive estimator, ``tdi`` produces the index
reports and robustness artifacts, ``optimize`` turns a report into an
updated supply plan, ``simulate`` and ``loop`` drive the synthetic market.

Exit codes: 0 on success, 1 on domain errors (invalid data, degenerate
configurations), 2 on usage or I/O errors (unknown flags, missing files).

Every output-producing run writes a ``manifest.json`` next to its files,
recording tool version, full argument vector, parameters, and SHA-256
checksums of all inputs; ``topdog replay manifest.json`` re-executes the
recorded run and reproduces the outputs byte for byte.  Report commands
also render PNG figures of their tables unless ``--no-figures`` is given.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import inspect_files, load_dataset, write_dataset
from .errors import TopDogError
from .rebalance import (
    ClusterConfig,
    SupplyPlan,
    allocation_to_csv,
    classify,
    default_increments,
    default_intervals,
    discretize_plan,
    update_supply,
)
from .sampling import discrepancy_curve, partition_products
from .simulator import SimConfig, closed_loop, group_factor_plan, plan_items, simulate
from .stockout import compute_stockout_days
from .tdi import (
    TdiReport,
    baseline_matrices,
    occurring_tdis,
    occurring_to_csv,
    relative_distribution,
    robustness_score,
    spread_stats_to_csv,
    tdi_report,
)

MANIFEST_NAME = "manifest.json"


def _dampening(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid float value: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(
            f"NonPositiveDampening: dampening must be > 0, got {text}"
        )
    return value


def _factors(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got {text!r}"
        ) from None


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(
    out: Path,
    command: str,
    argv: list[str],
    parameters: dict,
    inputs: list[str | Path],
    outputs: list[str],
) -> None:
    manifest = {
        "tool": "topdog",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "parameters": parameters,
        "inputs": {
            str(p): {
                "absolute": str(Path(p).resolve()),
                "sha256": _sha256(Path(p)),
            }
            for p in inputs
        },
        "outputs": sorted(outputs),
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# --- validate -----------------------------------------------------------------


def cmd_validate(args: argparse.Namespace, argv: list[str]) -> int:
    dataset, report = inspect_files(
        args.sales,
        args.supply,
        horizon=args.horizon,
        launch_dates_path=args.launch_dates,
    )
    for line in report.lines():
        print(line)
    print(
        f"dataset: {dataset.n_branches} branches, {dataset.n_products} products, "
        f"{dataset.n_transactions} transaction groups, horizon {dataset.horizon}"
    )
    return 0 if report.ok else 1


# --- discrepancy ----------------------------------------------------------------


def cmd_discrepancy(args: argparse.Namespace, argv: list[str]) -> int:
    dataset = load_dataset(
        args.sales,
        args.supply,
        horizon=args.horizon,
        launch_dates_path=args.launch_dates,
    )
    curve = discrepancy_curve(dataset, seed=args.seed, d_max=args.days)
    out = _out_dir(args)
    outputs = ["discrepancy_curve.csv"]
    curve.to_csv(out / "discrepancy_curve.csv")
    if not args.no_figures:
        from .figures import discrepancy_figure, save_figure

        save_figure(discrepancy_figure(curve), out / "discrepancy_curve.png")
        outputs.append("discrepancy_curve.png")
    inputs = [args.sales, args.supply] + (
        [args.launch_dates] if args.launch_dates else []
    )
    _write_manifest(
        out,
        "discrepancy",
        argv,
        {
            "seed": args.seed,
            "days": args.days,
            "horizon": args.horizon,
            "figures": not args.no_figures,
        },
        inputs,
        outputs,
    )
    with np.errstate(invalid="ignore"):
        print(
            f"days 1..{args.days}: mean delta(D1,D2) = "
            f"{np.nanmean(curve.delta_samples):.4f}, "
            f"mean delta(D1,supply) = {np.nanmean(curve.delta_supply_d1):.4f}, "
            f"mean delta(D2,supply) = {np.nanmean(curve.delta_supply_d2):.4f}"
        )
    print(f"wrote {out / 'discrepancy_curve.csv'}")
    return 0


# --- tdi ------------------------------------------------------------------------


def cmd_tdi(args: argparse.Namespace, argv: list[str]) -> int:
    dataset = load_dataset(
        args.sales,
        args.supply,
        horizon=args.horizon,
        launch_dates_path=args.launch_dates,
    )
    partition = partition_products(dataset.products, seed=args.seed)
    table = compute_stockout_days(dataset, tiebreak=args.tiebreak)
    reports = tdi_report(table, partition, dampening=args.dampening)
    matrix = relative_distribution(reports)
    score = robustness_score(matrix)
    deterministic, random_matrix = baseline_matrices(
        n_branches=dataset.n_branches, seed=args.seed
    )
    spreads = occurring_tdis(reports)

    out = _out_dir(args)
    outputs = []
    for report in reports:
        name = f"tdi_{report.sample_id}.csv"
        report.to_csv(out / name)
        outputs.append(name)
    matrix.to_csv(out / "relative_distribution.csv")
    deterministic.to_csv(out / "baseline_deterministic.csv")
    random_matrix.to_csv(out / "baseline_random.csv")
    occurring_to_csv(spreads, out / "occurring_tdis.csv")
    spread_stats_to_csv(spreads, out / "occurring_tdi_stats.csv")
    scores = {
        "robustness_score": score,
        "deterministic_baseline_score": robustness_score(deterministic),
        "random_baseline_score": robustness_score(random_matrix),
        "dampening": args.dampening,
        "seed": args.seed,
        "tiebreak": args.tiebreak,
    }
    (out / "robustness.json").write_text(json.dumps(scores, indent=2) + "\n")
    outputs += [
        "relative_distribution.csv",
        "baseline_deterministic.csv",
        "baseline_random.csv",
        "occurring_tdis.csv",
        "occurring_tdi_stats.csv",
        "robustness.json",
    ]
    if args.dump_stockouts:
        table.to_csv(out / "stockout_days.csv")
        outputs.append("stockout_days.csv")
    if not args.no_figures:
        from .figures import (
            occurring_tdis_figure,
            relative_distribution_figure,
            save_figure,
        )

        save_figure(
            relative_distribution_figure(matrix), out / "relative_distribution.png"
        )
        save_figure(
            relative_distribution_figure(
                random_matrix, title="Random baseline (no cross-sample structure)"
            ),
            out / "baseline_random.png",
        )
        save_figure(occurring_tdis_figure(spreads), out / "occurring_tdis.png")
        outputs += [
            "relative_distribution.png",
            "baseline_random.png",
            "occurring_tdis.png",
        ]
    inputs = [args.sales, args.supply] + (
        [args.launch_dates] if args.launch_dates else []
    )
    _write_manifest(
        out,
        "tdi",
        argv,
        {
            "seed": args.seed,
            "dampening": args.dampening,
            "horizon": args.horizon,
            "tiebreak": args.tiebreak,
            "figures": not args.no_figures,
            "dump_stockouts": args.dump_stockouts,
        },
        inputs,
        outputs,
    )
    universe_spread = next(s for s in spreads if s.sample_id == "D7")
    print(
        f"robustness score {score:.4f} "
        f"(deterministic baseline {scores['deterministic_baseline_score']:.4f}, "
        f"random baseline {scores['random_baseline_score']:.4f})"
    )
    print(
        f"universe index range [{universe_spread.minimum:.3f}, "
        f"{universe_spread.maximum:.3f}], spread {universe_spread.spread:.3f}"
    )
    print(f"wrote {len(outputs)} files to {out}")
    return 0


# --- optimize ---------------------------------------------------------------------


def cmd_optimize(args: argparse.Namespace, argv: list[str]) -> int:
    report = TdiReport.from_csv(args.tdi_report)
    if args.supply_plan:
        plan = SupplyPlan.from_csv(args.supply_plan)
        plan_input = args.supply_plan
    else:
        plan = SupplyPlan.from_supply_csv(args.supply)
        plan_input = args.supply
    if set(plan.branches) != set(report.branches):
        raise ValueError("supply plan and index report cover different branches")

    if args.cluster_config:
        config = ClusterConfig.from_json(args.cluster_config)
    else:
        boundaries = default_intervals(report, n_clusters=args.clusters)
        increments = (
            args.increments
            if args.increments is not None
            else default_increments(len(plan.branches), n_clusters=args.clusters)
        )
        if len(increments) != args.clusters:
            raise ValueError(
                f"--increments needs {args.clusters} values, got {len(increments)}"
            )
        config = ClusterConfig(boundaries=boundaries, increments=increments)

    assignment = classify(report, config)
    updated = update_supply(plan, assignment, config)

    out = _out_dir(args)
    outputs = ["updated_plan.csv", "cluster_config.json"]
    updated.to_csv(out / "updated_plan.csv")
    config.to_json(out / "cluster_config.json")
    if args.total_items is not None:
        allocation_to_csv(
            discretize_plan(updated, args.total_items), out / "updated_items.csv"
        )
        outputs.append("updated_items.csv")
    inputs = [args.tdi_report, plan_input] + (
        [args.cluster_config] if args.cluster_config else []
    )
    _write_manifest(
        out,
        "optimize",
        argv,
        {
            "clusters": config.n_clusters,
            "boundaries": list(config.boundaries),
            "increments": list(config.increments),
            "total_items": args.total_items,
        },
        inputs,
        outputs,
    )
    sizes = np.bincount(
        [assignment[b] for b in plan.branches], minlength=config.n_clusters + 1
    )[1:]
    print(
        "cluster sizes "
        + ", ".join(f"{j + 1}: {int(n)}" for j, n in enumerate(sizes))
    )
    shift = float(np.abs(updated.shares - plan.shares).sum())
    print(f"total share shift {shift:.6f}")
    print(f"wrote {out / 'updated_plan.csv'}")
    return 0


# --- simulate ---------------------------------------------------------------------


def _load_config(args: argparse.Namespace) -> SimConfig:
    config = SimConfig.from_json(args.config)
    if args.seed is not None:
        config = SimConfig(
            branch_weights=config.branch_weights,
            n_products=config.n_products,
            seed=args.seed,
            horizon=config.horizon,
            sell_rate=config.sell_rate,
            a_min=config.a_min,
            a_max=config.a_max,
            markdowns=config.markdowns,
            items_per_product=config.items_per_product,
        )
    return config


def cmd_simulate(args: argparse.Namespace, argv: list[str]) -> int:
    config = _load_config(args)
    if args.supply_plan:
        plan = SupplyPlan.from_csv(args.supply_plan)
    elif args.group_factors:
        plan, _ = group_factor_plan(config, args.group_factors)
    else:
        plan = SupplyPlan(
            branches=config.branches, shares=config.weights, provenance="truth"
        )
    items = plan_items(config, plan, args.items_per_product)
    dataset = simulate(config, items)

    out = _out_dir(args)
    write_dataset(dataset, out / "sales.csv", out / "supply.csv")
    plan.to_csv(out / "plan.csv")
    SupplyPlan(
        branches=config.branches, shares=config.weights, provenance="truth"
    ).to_csv(out / "weights.csv")
    outputs = ["sales.csv", "supply.csv", "plan.csv", "weights.csv"]
    inputs = [args.config] + ([args.supply_plan] if args.supply_plan else [])
    _write_manifest(
        out,
        "simulate",
        argv,
        {
            "seed": config.seed,
            "group_factors": list(args.group_factors) if args.group_factors else None,
            "items_per_product": args.items_per_product,
        },
        inputs,
        outputs,
    )
    print(
        f"simulated {dataset.n_branches} branches x {dataset.n_products} products: "
        f"{int(dataset.supply.sum())} items supplied, "
        f"{int(dataset.sales_quantity.sum())} sold, "
        f"{dataset.n_transactions} transaction groups"
    )
    print(f"wrote {out / 'sales.csv'}")
    return 0


# --- loop -------------------------------------------------------------------------


def cmd_loop(args: argparse.Namespace, argv: list[str]) -> int:
    config = _load_config(args)
    if args.initial_plan:
        plan = SupplyPlan.from_csv(args.initial_plan)
    elif args.group_factors:
        plan, _ = group_factor_plan(config, args.group_factors)
    else:
        plan = SupplyPlan(
            branches=config.branches, shares=config.weights, provenance="truth"
        )
    cluster_config = (
        ClusterConfig.from_json(args.cluster_config) if args.cluster_config else None
    )
    trajectory = closed_loop(
        config,
        plan,
        cluster_config=cluster_config,
        rounds=args.rounds,
        dampening=args.dampening,
        increment_scale=args.increment_scale,
        increment_decay=args.increment_decay,
        items_per_product=args.items_per_product,
    )

    out = _out_dir(args)
    trajectory.to_csv(out / "trajectory.csv")
    trajectory.initial_plan.to_csv(out / "initial_plan.csv")
    trajectory.final_plan.to_csv(out / "final_plan.csv")
    outputs = ["trajectory.csv", "initial_plan.csv", "final_plan.csv"]
    if not args.no_figures:
        from .figures import save_figure, trajectory_figure

        save_figure(trajectory_figure(trajectory), out / "trajectory.png")
        outputs.append("trajectory.png")
    inputs = [args.config] + (
        [args.initial_plan] if args.initial_plan else []
    ) + ([args.cluster_config] if args.cluster_config else [])
    _write_manifest(
        out,
        "loop",
        argv,
        {
            "seed": config.seed,
            "rounds": args.rounds,
            "dampening": args.dampening,
            "increment_scale": args.increment_scale,
            "increment_decay": args.increment_decay,
            "group_factors": list(args.group_factors) if args.group_factors else None,
            "items_per_product": args.items_per_product,
        },
        inputs,
        outputs,
    )
    gaps = trajectory.gaps
    print(f"initial gap {gaps[0]:.4f}, final gap {gaps[-1]:.4f} after {args.rounds} rounds")
    if gaps[0] > 0:
        print(f"gap ratio {gaps[-1] / gaps[0]:.3f}")
    print(f"wrote {out / 'trajectory.csv'}")
    return 0


# --- replay ------------------------------------------------------------------------


def cmd_replay(args: argparse.Namespace, argv: list[str]) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    for as_given, info in manifest["inputs"].items():
        path = Path(info["absolute"])
        if not path.exists():
            raise FileNotFoundError(f"recorded input {path} no longer exists")
        digest = _sha256(path)
        if digest != info["sha256"]:
            raise TopDogError(
                f"input {as_given} changed since the recorded run "
                f"(sha256 {digest} != {info['sha256']})"
            )
    replay_argv = [
        manifest["inputs"].get(token, {}).get("absolute", token)
        for token in manifest["argv"]
    ]
    if args.out_dir is not None:
        if "--out-dir" in replay_argv:
            replay_argv[replay_argv.index("--out-dir") + 1] = args.out_dir
        else:
            replay_argv += ["--out-dir", args.out_dir]
    print(f"replaying: topdog {' '.join(replay_argv)}")
    return main(replay_argv)


# --- parser ------------------------------------------------------------------------


def _add_dataset_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("sales", help="sales CSV (product_id,branch_id,day,quantity)")
    parser.add_argument("supply", help="supply CSV (product_id,branch_id,quantity)")
    parser.add_argument(
        "--horizon",
        type=int,
        default=60,
        help="season length in days (default 60)",
    )
    parser.add_argument(
        "--launch-dates",
        default=None,
        help="launch-date sidecar CSV; the sales day column must then hold ISO dates",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topdog",
        description="Stock-out based branch demand indexing and supply rebalancing.",
    )
    parser.add_argument("--version", action="version", version=f"topdog {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a season's CSV tables")
    _add_dataset_arguments(p)
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("discrepancy", help="naive estimator discrepancy curve")
    _add_dataset_arguments(p)
    p.add_argument("--seed", type=int, default=0, help="partition seed (default 0)")
    p.add_argument("--days", type=int, default=60, help="last day to evaluate")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(handler=cmd_discrepancy)

    p = sub.add_parser("tdi", help="index reports, matrix, and robustness artifacts")
    _add_dataset_arguments(p)
    p.add_argument("--seed", type=int, default=0, help="partition seed (default 0)")
    p.add_argument(
        "--dampening",
        type=_dampening,
        default=5.0,
        help="dampening constant C > 0 (default 5)",
    )
    p.add_argument(
        "--tiebreak",
        choices=("shared", "remaining-fraction"),
        default="shared",
        help="ordering of censored stock-out days (default shared)",
    )
    p.add_argument(
        "--dump-stockouts",
        action="store_true",
        help="also write the per-pair stock-out day table",
    )
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(handler=cmd_tdi)

    p = sub.add_parser("optimize", help="update a supply plan from an index report")
    p.add_argument("tdi_report", help="index report CSV (one sample)")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--supply-plan", help="current plan CSV (branch_id,share)")
    source.add_argument(
        "--supply", help="supply CSV; branch shares derived from item totals"
    )
    p.add_argument(
        "--clusters", type=int, default=3, help="number of clusters (default 3)"
    )
    p.add_argument(
        "--increments",
        type=_factors,
        default=None,
        help="comma-separated per-cluster share increments",
    )
    p.add_argument(
        "--cluster-config",
        default=None,
        help="JSON file with explicit boundaries and increments",
    )
    p.add_argument(
        "--total-items",
        type=int,
        default=None,
        help="also write an integer item allocation for this season size",
    )
    p.add_argument("--out-dir", required=True, help="output directory")
    p.set_defaults(handler=cmd_optimize)

    p = sub.add_parser("simulate", help="simulate one synthetic season")
    p.add_argument("--config", required=True, help="market config JSON")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    plan_source = p.add_mutually_exclusive_group()
    plan_source.add_argument("--supply-plan", help="plan CSV to apportion items from")
    plan_source.add_argument(
        "--group-factors",
        type=_factors,
        default=None,
        help="mis-supply factors per contiguous branch group, e.g. 0.5,1,2",
    )
    p.add_argument(
        "--items-per-product",
        type=int,
        default=None,
        help="season total per product (default 3 per pair)",
    )
    p.add_argument("--out-dir", required=True, help="output directory")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("loop", help="closed simulate-index-replan loop")
    p.add_argument("--config", required=True, help="market config JSON")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--rounds", type=int, default=10, help="rounds to run (default 10)")
    plan_source = p.add_mutually_exclusive_group()
    plan_source.add_argument("--initial-plan", help="starting plan CSV")
    plan_source.add_argument(
        "--group-factors",
        type=_factors,
        default=None,
        help="mis-supply factors for the starting plan, e.g. 0.5,1,1",
    )
    p.add_argument(
        "--dampening", type=_dampening, default=5.0, help="dampening constant C"
    )
    p.add_argument(
        "--cluster-config",
        default=None,
        help="fixed cluster JSON; default re-derives boundaries per round",
    )
    p.add_argument(
        "--increment-scale",
        type=float,
        default=0.1,
        help="share increment is this value divided by the branch count",
    )
    p.add_argument(
        "--increment-decay",
        type=float,
        default=1.0,
        help="multiplies the increment scale each round",
    )
    p.add_argument(
        "--items-per-product",
        type=int,
        default=None,
        help="season total per product (default 3 per pair)",
    )
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(handler=cmd_loop)

    p = sub.add_parser("replay", help="re-run a recorded manifest byte-identically")
    p.add_argument("manifest", help="manifest.json of a previous run")
    p.add_argument(
        "--out-dir", default=None, help="redirect outputs (default: recorded location)"
    )
    p.set_defaults(handler=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args, argv)
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return 2
    except TopDogError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
