"""Stock-out based branch demand indexing and supply rebalancing.

The toolkit ingests per-branch seasonal sales and supply tables, derives
per-pair stock-out days, scores each branch's demand pressure with the
dampened top-dog index, checks the index's stability across product
samples, and turns reports into next-season supply plans.  A synthetic
market simulator with known ground truth closes the loop for validation.
"""

from .dataset import (
    DEFAULT_HORIZON,
    Dataset,
    SupplyRecord,
    Transaction,
    ValidationIssue,
    ValidationReport,
    inspect_files,
    load_dataset,
    validate_dataset,
    write_dataset,
)
from .errors import (
    BranchSetMismatch,
    DayBeyondHorizon,
    DegenerateTdis,
    EmptyUniverse,
    MalformedRow,
    NegativeShare,
    NoSales,
    NonPositiveDampening,
    OversoldProduct,
    TooFewBranches,
    TopDogError,
    UnknownPair,
    ZeroMass,
    ZeroSupply,
)
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
from .sampling import (
    COMPLEMENTARY_PAIRS,
    LABEL_SETS,
    SAMPLE_IDS,
    DemandEstimate,
    DiscrepancyCurve,
    SamplePartition,
    discrepancy,
    discrepancy_curve,
    partition_products,
    phi,
    sample_share_matrix,
    supply_discrepancy,
    supply_shares,
)
from .simulator import (
    RoundRecord,
    SimConfig,
    Trajectory,
    closed_loop,
    evaluate_recovery,
    group_factor_plan,
    plan_items,
    simulate,
)
from .stockout import (
    CENSORED,
    StockOutDay,
    StockOutTable,
    compute_stockout_days,
    sold_out,
)
from .tdi import (
    DEFAULT_DAMPENING,
    RelativeDistributionMatrix,
    TdiReport,
    TdiSpread,
    baseline_matrices,
    occurring_tdis,
    relative_distribution,
    relative_distribution_from_values,
    robustness_score,
    tdi,
    tdi_report,
    top_dog_counts,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # dataset
    "DEFAULT_HORIZON",
    "Dataset",
    "SupplyRecord",
    "Transaction",
    "ValidationIssue",
    "ValidationReport",
    "inspect_files",
    "load_dataset",
    "validate_dataset",
    "write_dataset",
    # errors
    "TopDogError",
    "MalformedRow",
    "OversoldProduct",
    "UnknownPair",
    "DayBeyondHorizon",
    "EmptyUniverse",
    "NoSales",
    "BranchSetMismatch",
    "ZeroSupply",
    "NonPositiveDampening",
    "TooFewBranches",
    "DegenerateTdis",
    "NegativeShare",
    "ZeroMass",
    # stockout
    "CENSORED",
    "StockOutDay",
    "StockOutTable",
    "compute_stockout_days",
    "sold_out",
    # sampling
    "SAMPLE_IDS",
    "LABEL_SETS",
    "COMPLEMENTARY_PAIRS",
    "SamplePartition",
    "DemandEstimate",
    "DiscrepancyCurve",
    "partition_products",
    "phi",
    "discrepancy",
    "supply_shares",
    "supply_discrepancy",
    "discrepancy_curve",
    "sample_share_matrix",
    # tdi
    "DEFAULT_DAMPENING",
    "TdiReport",
    "TdiSpread",
    "RelativeDistributionMatrix",
    "top_dog_counts",
    "tdi",
    "tdi_report",
    "relative_distribution",
    "relative_distribution_from_values",
    "robustness_score",
    "baseline_matrices",
    "occurring_tdis",
    # rebalance
    "ClusterConfig",
    "SupplyPlan",
    "default_intervals",
    "default_increments",
    "allocation_to_csv",
    "classify",
    "update_supply",
    "discretize_plan",
    # simulator
    "SimConfig",
    "simulate",
    "plan_items",
    "group_factor_plan",
    "evaluate_recovery",
    "closed_loop",
    "RoundRecord",
    "Trajectory",
]
