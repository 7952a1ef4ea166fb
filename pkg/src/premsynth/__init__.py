"""Differentially private synthetic histograms with relative-error guarantees."""

from .baselines import (
    SparseHistogramSpace,
    exponential_mechanism,
    laplace_per_query_baseline,
    relative_score,
    sparse_sample_histogram,
)
from .core import (
    BinaryQuery,
    DimensionError,
    Domain,
    Histogram,
    QueryFamily,
    RealQuery,
    evaluate_query,
    histogram_from_records,
    indicator_mass,
    restrict,
    sample_records_from_histogram,
)
from .evaluation import AccuracyAudit, EngineParams, audit, run_engine, scaling_sweep
from .find_margin import MarginVerdict, find_margin_approx, find_margin_pure
from .prem import PremConfig, PremResult, derive_parameters, mwu_update, run_prem
from .privacy import (
    AccountingConstants,
    NoiseScaleClamped,
    PrivacyBudget,
    advanced_composition,
    laplace_sample,
    solve_per_round_epsilon,
    unsafe_zero_noise,
)
from .range_monitor import ApproxRangeMonitor, PureRangeMonitor, Response
from .reductions import binarize_family, build_ladder, run_prem_real, staircase_surrogate
from .workloads import WorkloadSpec, generate_workload

__version__ = "0.1.0"
