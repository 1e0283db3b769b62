"""Statistics, validation and tuning of transmission branch parameters by voltage class."""

from .errors import (
    BranchStatError,
    CannotTuneError,
    DegenerateSampleError,
    FitFailedError,
    InsufficientDataError,
    InvalidInputError,
    NoFiniteMeanError,
    ParseError,
)
from .grid_model import (
    BaseQuantities,
    BranchKind,
    BranchRecord,
    ParameterKind,
    VoltageClass,
    classify_voltage,
)
from .ingest import (
    fill_line_lengths,
    great_circle_km,
    parse_branch_csv,
    parse_matpower_subset,
    read_case,
    write_branch_csv,
)
from .interdependence import (
    ClassMeanSeries,
    DependenceClass,
    PowerFit,
    class_means,
    classify_dependence,
    fit_power,
)
from .per_unit import (
    ParamValue,
    convert_pu,
    distributed_reactance,
    extract_parameter,
    to_own_base_x,
    x_over_r,
)
from .pipeline import Settings, run_analysis
from .reference import ParameterReference, ReferenceStats, bundled_reference
from .stats import (
    CleanSample,
    DistFit,
    ExponentialParams,
    Family,
    GevParams,
    Histogram,
    NormalParams,
    best_fit,
    build_histogram,
    fit_exponential,
    fit_gev,
    fit_normal,
    gev_cdf,
    kl_divergence,
    remove_extreme_outliers,
)
from .synthesis import (
    SeededRng,
    TuningPlan,
    apply_plan,
    pin_mean,
    sample_exponential,
    sample_gev,
    sample_normal,
    tune_case,
)
from .validate import (
    ValidationVerdict,
    Verdict,
    load_reference,
    render_table,
    validate_case,
    write_stats_bundle,
)

__version__ = "0.1.0"

__all__ = [
    "BaseQuantities",
    "BranchKind",
    "BranchRecord",
    "BranchStatError",
    "CannotTuneError",
    "ClassMeanSeries",
    "CleanSample",
    "DegenerateSampleError",
    "DependenceClass",
    "DistFit",
    "ExponentialParams",
    "Family",
    "FitFailedError",
    "GevParams",
    "Histogram",
    "InsufficientDataError",
    "InvalidInputError",
    "NoFiniteMeanError",
    "NormalParams",
    "ParamValue",
    "ParameterKind",
    "ParameterReference",
    "ParseError",
    "PowerFit",
    "ReferenceStats",
    "SeededRng",
    "Settings",
    "TuningPlan",
    "ValidationVerdict",
    "Verdict",
    "VoltageClass",
    "apply_plan",
    "best_fit",
    "build_histogram",
    "bundled_reference",
    "class_means",
    "classify_dependence",
    "classify_voltage",
    "convert_pu",
    "distributed_reactance",
    "extract_parameter",
    "fill_line_lengths",
    "fit_exponential",
    "fit_gev",
    "fit_normal",
    "fit_power",
    "gev_cdf",
    "great_circle_km",
    "kl_divergence",
    "load_reference",
    "parse_branch_csv",
    "parse_matpower_subset",
    "pin_mean",
    "read_case",
    "remove_extreme_outliers",
    "render_table",
    "run_analysis",
    "sample_exponential",
    "sample_gev",
    "sample_normal",
    "to_own_base_x",
    "tune_case",
    "validate_case",
    "write_branch_csv",
    "write_stats_bundle",
    "x_over_r",
    "__version__",
]
