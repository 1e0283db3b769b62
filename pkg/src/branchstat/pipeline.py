"""The analysis run: from branch records to per-parameter statistics and a reference."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import FitFailedError, InsufficientDataError, InvalidInputError
from .grid_model import DEFAULT_KV_TOLERANCE, BranchRecord, ParameterKind, VoltageClass
from .interdependence import (
    DEFAULT_B_THRESHOLD,
    DEFAULT_MIN_COUNT,
    DEFAULT_R2_THRESHOLD,
    ClassMeanSeries,
    DependenceClass,
    PowerFit,
    class_means,
    classify_dependence,
    clean_groups,
    fit_power,
)
from .per_unit import extract_parameter
from .reference import ParameterReference, ReferenceStats
from .stats import (
    DEFAULT_BINS,
    DEFAULT_FENCE,
    CleanSample,
    DistFit,
    Family,
    Histogram,
    best_fit,
    build_histogram,
)
from .synthesis import DEFAULT_SEED


@dataclass(frozen=True)
class Settings:
    n_bins: int = DEFAULT_BINS
    fence_multiplier: float = DEFAULT_FENCE
    ratio_lo: float = 0.5
    ratio_hi: float = 2.0
    min_count: int = DEFAULT_MIN_COUNT
    seed: int = DEFAULT_SEED
    b_threshold: float = DEFAULT_B_THRESHOLD
    r2_threshold: float = DEFAULT_R2_THRESHOLD
    kv_tolerance: float = DEFAULT_KV_TOLERANCE

    def __post_init__(self) -> None:
        if self.n_bins < 2:
            raise InvalidInputError("--bins must be at least 2")
        if self.fence_multiplier <= 0:
            raise InvalidInputError("--fence must be positive")
        if not (0 < self.ratio_lo < 1 < self.ratio_hi):
            raise InvalidInputError("ratio band must satisfy 0 < ratio_lo < 1 < ratio_hi")
        if self.min_count < 1:
            raise InvalidInputError("--min-count must be at least 1")
        if self.b_threshold <= 0:
            raise InvalidInputError("--b-threshold must be positive")
        if not (0 < self.r2_threshold <= 1):
            raise InvalidInputError("--r2-threshold must lie in (0, 1]")
        if not (0 <= self.kv_tolerance < 0.5):
            raise InvalidInputError("kV tolerance must lie in [0, 0.5)")


@dataclass(frozen=True)
class ClassAnalysis:
    voltage_class: VoltageClass
    n_raw: int
    sample: CleanSample
    histogram: Histogram | None
    fits: tuple[DistFit, ...]
    fit_failures: tuple[str, ...] = ()


@dataclass
class ParameterAnalysis:
    parameter: ParameterKind
    n_values: int
    skips: dict[str, int]
    classes: list[ClassAnalysis] = field(default_factory=list)
    series: ClassMeanSeries | None = None
    power_fit: PowerFit | None = None
    dependence: DependenceClass | None = None
    family: Family | None = None
    global_mean: float | None = None
    notes: list[str] = field(default_factory=list)
    reference: ParameterReference | None = None

    @property
    def has_data(self) -> bool:
        return self.series is not None


@dataclass
class AnalysisResult:
    case_name: str
    settings: Settings
    parameters: list[ParameterAnalysis]
    n_records: int
    warnings: list[str] = field(default_factory=list)

    def reference(self) -> ReferenceStats:
        entries = {p.parameter: p.reference for p in self.parameters if p.reference is not None}
        return ReferenceStats(self.case_name, entries, f"analyze run {self.case_name}")

    @property
    def any_data(self) -> bool:
        return any(p.has_data for p in self.parameters)


def analyze_parameter(
    records: Sequence[BranchRecord], parameter: ParameterKind, settings: Settings
) -> ParameterAnalysis:
    values, skips = extract_parameter(records, parameter, settings.kv_tolerance)
    result = ParameterAnalysis(parameter, len(values), skips.as_dict())
    if not values:
        result.notes.append("no values")
        return result

    for vclass, sample in clean_groups(values, settings.fence_multiplier).items():
        n_raw = sample.n + len(sample.removed_outliers)
        if sample.n < settings.min_count:
            continue
        failures: list[tuple[Family, str]] = []
        hist, fits = None, ()
        try:
            hist = build_histogram(sample, settings.n_bins)
            fits = tuple(best_fit(sample, n_bins=settings.n_bins, failures=failures))
        except (InsufficientDataError, FitFailedError, InvalidInputError) as exc:
            failures.append((None, str(exc)))
        notes = tuple(f"{fam.value if fam else 'all'}: {msg}" for fam, msg in failures)
        result.classes.append(ClassAnalysis(vclass, n_raw, sample, hist, fits, notes))

    try:
        result.series = class_means(values, settings.min_count, settings.fence_multiplier)
    except InsufficientDataError as exc:
        result.notes.append(str(exc))
        return result

    pooled = [v for c in result.classes for v in c.sample.values]
    result.global_mean = math.fsum(pooled) / len(pooled) if pooled else None

    winners = Counter(c.fits[0].family for c in result.classes if c.fits)
    if winners:
        top = max(winners.values())
        result.family = next(f for f in Family if winners.get(f) == top)

    try:
        result.power_fit = fit_power(result.series)
        result.dependence = classify_dependence(result.power_fit, settings.b_threshold, settings.r2_threshold)
    except InsufficientDataError as exc:
        result.notes.append(f"power fit skipped: {exc}")
        result.dependence = DependenceClass.VOLTAGE_INDEPENDENT
    except (FitFailedError, InvalidInputError) as exc:
        result.notes.append(f"power fit failed: {exc}")
        result.dependence = DependenceClass.VOLTAGE_INDEPENDENT

    class_fits = {}
    if result.family is not None:
        for c in result.classes:
            match = [f for f in c.fits if f.family is result.family]
            if match:
                class_fits[c.voltage_class.kv] = match[0]
    if result.dependence is DependenceClass.VOLTAGE_INDEPENDENT and result.global_mean is None:
        return result
    result.reference = ParameterReference(
        parameter=parameter,
        dependence=result.dependence,
        family=result.family,
        power_fit=result.power_fit,
        class_fits=class_fits,
        global_mean=result.global_mean,
        provenance="analyze run",
    )
    return result


def run_analysis(records: Sequence[BranchRecord], settings: Settings, case_name: str = "case") -> AnalysisResult:
    """Statistics of all seven parameters of one case."""
    parameters = [analyze_parameter(records, p, settings) for p in ParameterKind]
    return AnalysisResult(case_name, settings, parameters, len(records))
