"""Validate a case against reference statistics and write reports and stats bundles."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import BranchStatError, InsufficientDataError, InvalidInputError
from .grid_model import DEFAULT_KV_TOLERANCE, BranchRecord, ParameterKind, VoltageClass
from .interdependence import DependenceClass, class_means, clean_groups
from .per_unit import extract_parameter
from .pipeline import AnalysisResult, ParameterAnalysis, Settings
from .reference import (
    SCHEMA_VERSION,
    ParameterReference,
    ReferenceStats,
    entry_to_dict,
    fit_to_dict,
    num,
    power_fit_to_dict,
    reference_from_dict,
    reference_to_dict,
)
from .stats import DEFAULT_BINS, DEFAULT_FENCE, build_histogram, kl_divergence, model_mass


class Verdict(Enum):
    PASS = "✓"
    TUNING_REQUIRED = "TR"
    NO_DATA = "n.d."


@dataclass(frozen=True)
class ClassVerdict:
    voltage_class: VoltageClass
    n: int
    case_mean: float
    raw_mean: float
    reference_value: float | None
    ratio: float | None
    verdict: Verdict
    kl_to_reference: float | None = None


@dataclass(frozen=True)
class ValidationVerdict:
    parameter: ParameterKind
    entries: tuple[ClassVerdict, ...]
    overall: Verdict
    note: str = ""

    @property
    def failing_classes(self) -> list[VoltageClass]:
        return [e.voltage_class for e in self.entries if e.verdict is Verdict.TUNING_REQUIRED]


def overall_verdict(entries: Iterable[ClassVerdict]) -> Verdict:
    verdicts = {e.verdict for e in entries}
    if Verdict.TUNING_REQUIRED in verdicts:
        return Verdict.TUNING_REQUIRED
    if Verdict.PASS in verdicts:
        return Verdict.PASS
    return Verdict.NO_DATA


def _shape_diagnostic(entry: ParameterReference, kv: float, values: Sequence[float], n_bins: int) -> float | None:
    if not entry.class_fits_usable or kv not in entry.class_fits:
        return None
    try:
        hist = build_histogram(values, n_bins)
        return kl_divergence(hist, model_mass(entry.class_fits[kv].params, hist.edges))
    except BranchStatError:
        return None


def _judge(entry: ParameterReference | None, kv: float, mean: float, lo: float, hi: float):
    """(reference value, ratio, verdict) for one class mean."""
    if entry is None:
        return None, None, Verdict.NO_DATA
    if entry.dependence is DependenceClass.VOLTAGE_DEPENDENT:
        if not entry.power_fit_usable:
            return None, None, Verdict.NO_DATA
        ref = float(entry.power_fit.predict(kv))
        ratio = mean / ref
        return ref, ratio, Verdict.PASS if lo <= ratio <= hi else Verdict.TUNING_REQUIRED
    checks = []
    ref = ratio = None
    if entry.global_mean_usable:
        ref = entry.global_mean
        ratio = mean / ref
        checks.append(lo <= ratio <= hi)
    if entry.range_usable:
        r_lo, r_hi = entry.independent_range
        checks.append(r_lo < mean <= r_hi)
        if ref is None:
            ref = 0.5 * (r_lo + r_hi)
    if not checks:
        return None, None, Verdict.NO_DATA
    return ref, ratio, Verdict.PASS if any(checks) else Verdict.TUNING_REQUIRED


def validate_case(
    records: Sequence[BranchRecord],
    reference: ReferenceStats,
    ratio_lo: float = 0.5,
    ratio_hi: float = 2.0,
    min_count: int = 10,
    fence_multiplier: float = DEFAULT_FENCE,
    kv_tolerance: float = DEFAULT_KV_TOLERANCE,
    n_bins: int = DEFAULT_BINS,
) -> list[ValidationVerdict]:
    """Compare outlier-cleaned class means of every parameter with the reference.

    Voltage-dependent parameters pass when mean / curve(kV) lies in
    [ratio_lo, ratio_hi]. Voltage-independent ones pass when the mean lies
    in the admissible range (lo, hi] or within the ratio band around the
    reference global mean. Placeholder references give "no data".
    """
    if not records:
        raise InvalidInputError("no branch records to validate")
    if not (0 < ratio_lo < 1 < ratio_hi):
        raise InvalidInputError("ratio band must satisfy 0 < ratio_lo < 1 < ratio_hi")
    verdicts = []
    for parameter in ParameterKind:
        values, _ = extract_parameter(records, parameter, kv_tolerance)
        entry = reference.get(parameter)
        try:
            series = class_means(values, min_count, fence_multiplier)
        except InsufficientDataError as exc:
            verdicts.append(ValidationVerdict(parameter, (), Verdict.NO_DATA, str(exc)))
            continue
        samples = {vc.kv: s for vc, s in clean_groups(values, fence_multiplier).items()}
        entries = []
        for point in series.points:
            ref, ratio, verdict = _judge(entry, point.kv, point.mean, ratio_lo, ratio_hi)
            kl = _shape_diagnostic(entry, point.kv, samples[point.kv].values, n_bins) if entry else None
            entries.append(ClassVerdict(
                VoltageClass(point.kv), point.n, point.mean, point.raw_mean, ref, ratio, verdict, kl,
            ))
        note = "" if entry is not None else "parameter missing from reference"
        verdicts.append(ValidationVerdict(parameter, tuple(entries), overall_verdict(entries), note))
    return verdicts


# --- tables and reports -------------------------------------------------------

def render_table_columns(columns: Sequence[tuple[str, Sequence[ValidationVerdict]]]) -> str:
    """Markdown table: one row per parameter, one column per case."""
    lookup = [{v.parameter: v.overall for v in verdicts} for _, verdicts in columns]
    params = [p for p in ParameterKind if any(p in col for col in lookup)]
    lines = [
        "| Parameter | " + " | ".join(name for name, _ in columns) + " |",
        "|---|" + ":---:|" * len(columns),
    ]
    for p in params:
        cells = [col.get(p, Verdict.NO_DATA).value for col in lookup]
        lines.append(f"| {p.label} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render_table(verdicts: Sequence[ValidationVerdict], case_name: str) -> str:
    return render_table_columns([(case_name, verdicts)])


def _g(value: float | None, digits: int = 4) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{value:.{digits}g}"


def render_report(
    verdicts: Sequence[ValidationVerdict],
    case_name: str,
    reference_name: str,
    settings: Settings,
) -> str:
    out = [
        f"# Validation of {case_name}",
        "",
        f"Reference: {reference_name}  ",
        f"Ratio band: [{settings.ratio_lo:g}, {settings.ratio_hi:g}], min count {settings.min_count}, "
        f"outlier fence {settings.fence_multiplier:g} IQR, {settings.n_bins} bins, seed {settings.seed}  ",
        "KL diagnostics in nats; they never change a verdict.",
        "",
        render_table(verdicts, case_name),
    ]
    for v in verdicts:
        out += ["", f"## {v.parameter.label}: {v.overall.value}", ""]
        if v.note:
            out += [v.note, ""]
        if not v.entries:
            continue
        out += [
            "| class kV | n | mean (cleaned) | mean (raw) | reference | ratio | verdict | KL to reference |",
            "|---:|---:|---:|---:|---:|---:|:---:|---:|",
        ]
        for e in v.entries:
            out.append(
                f"| {e.voltage_class} | {e.n} | {_g(e.case_mean)} | {_g(e.raw_mean)} | {_g(e.reference_value)} "
                f"| {_g(e.ratio, 3)} | {e.verdict.value} | {_g(e.kl_to_reference, 3)} |"
            )
    return "\n".join(out) + "\n"


# --- stats bundle -------------------------------------------------------------

def _settings_dict(settings: Settings) -> dict[str, str]:
    return {
        "n_bins": str(settings.n_bins),
        "fence_multiplier": num(settings.fence_multiplier),
        "ratio_lo": num(settings.ratio_lo),
        "ratio_hi": num(settings.ratio_hi),
        "min_count": str(settings.min_count),
        "seed": str(settings.seed),
        "b_threshold": num(settings.b_threshold),
        "r2_threshold": num(settings.r2_threshold),
        "kv_tolerance": num(settings.kv_tolerance),
    }


def settings_from_dict(data: Mapping[str, str]) -> Settings:
    defaults = Settings()
    kwargs: dict[str, Any] = {}
    for key, default in vars(defaults).items():
        if key in data:
            kwargs[key] = type(default)(float(data[key])) if isinstance(default, int) else float(data[key])
    return Settings(**kwargs)


def _parameter_section(pa: ParameterAnalysis, verdict: ValidationVerdict | None) -> dict[str, Any]:
    section: dict[str, Any] = {
        "parameter": pa.parameter.value,
        "unit": pa.parameter.unit,
        "status": "ok" if pa.has_data else "NoData",
        "n_values": str(pa.n_values),
        "skips": {k: str(v) for k, v in pa.skips.items()},
        "notes": list(pa.notes),
        "dependence": pa.dependence.value if pa.dependence else None,
        "family": pa.family.value if pa.family else None,
        "power_fit": power_fit_to_dict(pa.power_fit),
        "global_mean": num(pa.global_mean),
        "class_means": [
            {"kv": num(p.kv), "mean": num(p.mean), "raw_mean": num(p.raw_mean), "n": str(p.n),
             "n_removed": str(p.n_removed)}
            for p in (pa.series.points if pa.series else ())
        ],
        "classes": [],
        "reference": entry_to_dict(pa.reference) if pa.reference else None,
    }
    for c in pa.classes:
        s = c.sample
        section["classes"].append({
            "kv": num(c.voltage_class.kv),
            "n_raw": str(c.n_raw),
            "n": str(s.n),
            "removed_outliers": [num(v) for v in s.removed_outliers],
            "mean": num(s.mean),
            "q1": num(s.q1), "q3": num(s.q3), "iqr": num(s.iqr),
            "fence_lo": num(s.fence_lo), "fence_hi": num(s.fence_hi),
            "histogram": None if c.histogram is None else {
                "edges": [num(e) for e in c.histogram.edges],
                "mass": [num(m) for m in c.histogram.mass],
            },
            "fits": [fit_to_dict(f) for f in c.fits],
            "fit_failures": list(c.fit_failures),
        })
    if verdict is not None:
        section["verdict"] = {
            "overall": verdict.overall.name,
            "classes": [
                {"kv": num(e.voltage_class.kv), "mean": num(e.case_mean), "reference": num(e.reference_value),
                 "ratio": num(e.ratio), "verdict": e.verdict.name}
                for e in verdict.entries
            ],
        }
    return section


def bundle_dict(analysis: AnalysisResult, verdicts: Sequence[ValidationVerdict] | None = None) -> dict[str, Any]:
    by_param = {v.parameter: v for v in verdicts or ()}
    return {
        "schema_version": SCHEMA_VERSION,
        "case_name": analysis.case_name,
        "provenance": f"analyze run {analysis.case_name}",
        "kl_units": "nats",
        "n_records": str(analysis.n_records),
        "settings": _settings_dict(analysis.settings),
        "warnings": list(analysis.warnings),
        "parameters": [_parameter_section(pa, by_param.get(pa.parameter)) for pa in analysis.parameters],
    }


def dumps(data: Mapping[str, Any]) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def write_stats_bundle(
    analysis: AnalysisResult,
    path: str | Path,
    verdicts: Sequence[ValidationVerdict] | None = None,
) -> Path:
    """Write all statistics of an analysis run as a JSON document of decimal strings."""
    path = Path(path)
    try:
        path.write_text(dumps(bundle_dict(analysis, verdicts)), encoding="utf-8")
    except OSError as exc:
        raise BranchStatError(f"{path}: cannot write stats bundle: {exc.strerror or exc}") from exc
    return path


def write_reference(reference: ReferenceStats, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.write_text(dumps(reference_to_dict(reference)), encoding="utf-8")
    except OSError as exc:
        raise BranchStatError(f"{path}: cannot write reference: {exc.strerror or exc}") from exc
    return path


def load_bundle(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise BranchStatError(f"{path}: cannot read stats bundle: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise BranchStatError(f"{path}:{exc.lineno}: malformed stats bundle: {exc.msg}") from exc


def load_reference(path: str | Path) -> ReferenceStats:
    """Load a stats bundle (or reference file) as reference statistics."""
    try:
        return reference_from_dict(load_bundle(path))
    except (KeyError, ValueError, TypeError) as exc:
        raise BranchStatError(f"{path}: invalid reference: {exc}") from exc
