"""Command-line front end.

Exit codes: 0 success, 1 validation found parameters needing tuning,
2 input or parse error, 3 no parameter had enough data, 4 tuning
impossible with the given reference.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from .errors import BranchStatError, CannotTuneError, InvalidInputError, ParseError
from .grid_model import ParameterKind, VoltageClass, classify_voltage
from .ingest import CaseFormat, ParsedCase, read_case, render_case, write_branch_csv
from .per_unit import extract_parameter
from .pipeline import Settings, run_analysis
from .interdependence import clean_groups
from .reference import ReferenceStats, bundled_reference, params_to_dict
from .report import plot_tables, render_bundle_summary
from .stats import Family, best_fit
from .synthesis import DEFAULT_SEED, SeededRng, apply_plan, synthesize_case, tune_case
from .toy import toy_reference
from .validate import (
    Verdict,
    load_bundle,
    load_reference,
    render_report,
    render_table,
    validate_case,
    write_stats_bundle,
)

EXIT_OK, EXIT_TUNING_REQUIRED, EXIT_INPUT, EXIT_NO_DATA, EXIT_CANNOT_TUNE = 0, 1, 2, 3, 4


class Abort(Exception):
    def __init__(self, message: str, code: int):
        self.message = message
        self.code = code
        super().__init__(message)


def handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except Abort as exc:
            click.echo(f"error: {exc.message}", err=True)
            sys.exit(exc.code)
        except CannotTuneError as exc:
            click.echo(f"error: cannot tune: {exc}", err=True)
            sys.exit(EXIT_CANNOT_TUNE)
        except ParseError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
        except BranchStatError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
    return wrapper


def settings_options(func):
    options = [
        click.option("--bins", "n_bins", type=int, default=50, show_default=True, help="Histogram bins for KL."),
        click.option("--min-count", type=int, default=10, show_default=True, help="Minimum values per voltage class."),
        click.option("--fence", "fence_multiplier", type=float, default=3.0, show_default=True,
                     help="Outlier fence in interquartile ranges."),
        click.option("--ratio-lo", type=float, default=0.5, show_default=True),
        click.option("--ratio-hi", type=float, default=2.0, show_default=True),
        click.option("--b-threshold", type=float, default=0.15, show_default=True,
                     help="|b| below this means voltage independent."),
        click.option("--r2-threshold", type=float, default=0.5, show_default=True,
                     help="r2 below this means voltage independent."),
        click.option("--seed", type=int, default=DEFAULT_SEED, envvar="BRANCHSTAT_SEED", show_default=True,
                     help="Random seed (env BRANCHSTAT_SEED)."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def case_options(func):
    func = click.option("--s-base", type=float, default=None, help="Override the MATPOWER baseMVA.")(func)
    func = click.option("--format", "fmt", type=click.Choice([f.value for f in CaseFormat]), default=None,
                        help="Case format (default: from the file extension).")(func)
    return func


def make_settings(**kw) -> Settings:
    try:
        return Settings(**kw)
    except InvalidInputError as exc:
        raise Abort(str(exc), EXIT_INPUT) from exc


def load_case(path: str, fmt: str | None, s_base: float | None) -> ParsedCase:
    try:
        case = read_case(path, CaseFormat(fmt) if fmt else None, s_base)
    except InvalidInputError as exc:
        raise Abort(f"{path}: {exc}", EXIT_INPUT) from exc
    for w in case.warnings:
        click.echo(f"warning: {path}: {w}", err=True)
    return case


def resolve_reference(source: str) -> ReferenceStats:
    if source == "bundled":
        return bundled_reference()
    if source == "toy":
        return toy_reference()
    return load_reference(source)


@click.group()
@click.version_option(package_name="artifact")
def main() -> None:
    """Voltage-class statistics of transmission branch parameters."""


@main.command()
@click.argument("cases", nargs=-1, required=True, type=click.Path())
@click.option("--out", default="branchstat_bundle.json", show_default=True, type=click.Path(),
              help="Stats bundle to write.")
@click.option("--plots", type=click.Path(file_okay=False), default=None, help="Directory for plot-data CSVs.")
@click.option("--name", default=None, help="Case name recorded in the bundle.")
@case_options
@settings_options
@handle_errors
def analyze(cases, out, plots, name, fmt, s_base, **kw):
    """Characterize all seven parameters of one or more cases."""
    settings = make_settings(**kw)
    records, warnings, stems = [], [], []
    for path in cases:
        case = load_case(path, fmt, s_base)
        records += case.records
        warnings += [f"{path}: {w}" for w in case.warnings]
        stems.append(case.name)
    analysis = run_analysis(records, settings, name or "+".join(stems))
    analysis.warnings = warnings
    write_stats_bundle(analysis, out)
    if plots:
        Path(plots).mkdir(parents=True, exist_ok=True)
        for filename, text in plot_tables(analysis).items():
            (Path(plots) / filename).write_text(text, encoding="utf-8")

    click.echo(f"case {analysis.case_name}: {analysis.n_records} branches, seed {settings.seed}")
    for pa in analysis.parameters:
        if not pa.has_data:
            click.echo(f"  {pa.parameter.value:16s} NoData")
            continue
        fit = pa.power_fit
        curve = f"a={fit.a:.4g} b={fit.b:.4g} r2={fit.r2:.3f}" if fit else "no power fit"
        click.echo(
            f"  {pa.parameter.value:16s} {len(pa.series.points)} classes, {curve}, "
            f"{pa.dependence.value if pa.dependence else '-'}, family {pa.family.value if pa.family else '-'}"
        )
    click.echo(f"wrote {out}")
    if not analysis.any_data:
        raise Abort("no parameter has enough data in any voltage class", EXIT_NO_DATA)


@main.command()
@click.argument("case_path", type=click.Path())
@click.option("--parameter", "-p", required=True, help="Parameter name, e.g. XfmrCapacityMva.")
@click.option("--families", default="normal,exponential,gev", show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Write the ranking as CSV.")
@case_options
@settings_options
@handle_errors
def fit(case_path, parameter, families, out, fmt, s_base, **kw):
    """Rank distribution fits of one parameter per voltage class by KL divergence."""
    settings = make_settings(**kw)
    parameter = ParameterKind.parse(parameter)
    lookup = {f.value.lower(): f for f in Family}
    try:
        chosen = [lookup[f.strip().lower()] for f in families.split(",") if f.strip()]
    except KeyError as exc:
        raise Abort(f"unknown family {exc.args[0]!r}", EXIT_INPUT) from exc
    case = load_case(case_path, fmt, s_base)
    values, _ = extract_parameter(case.records, parameter, settings.kv_tolerance)
    rows = []
    for vclass, sample in clean_groups(values, settings.fence_multiplier).items():
        if sample.n < settings.min_count:
            continue
        try:
            ranking = best_fit(sample, chosen, settings.n_bins)
        except BranchStatError as exc:
            click.echo(f"{vclass} kV: {exc}")
            continue
        click.echo(f"{vclass} kV (n={sample.n}, {len(sample.removed_outliers)} outliers removed):")
        for rank, f in enumerate(ranking, start=1):
            click.echo(f"  {rank}. {f.family.value:12s} KL={f.kl_to_empirical:.5f} nats  logL={f.log_likelihood:.4f}")
            rows.append((vclass.kv, rank, f))
    if not rows:
        raise Abort(f"no voltage class of {parameter.value} has {settings.min_count} values", EXIT_NO_DATA)
    if out:
        lines = ["class_kv,rank,family,kl_nats,log_likelihood,params"]
        for kv, rank, f in rows:
            params = ";".join(f"{k}={v}" for k, v in params_to_dict(f.params).items())
            lines.append(f"{kv:g},{rank},{f.family.value},{f.kl_to_empirical!r},{f.log_likelihood!r},{params}")
        Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _reference_option(func):
    return click.option("--reference", default="bundled", show_default=True,
                        help="'bundled', 'toy', or a stats bundle / reference file.")(func)


def _validate(records, reference, settings):
    return validate_case(
        records, reference, settings.ratio_lo, settings.ratio_hi, settings.min_count,
        settings.fence_multiplier, settings.kv_tolerance, settings.n_bins,
    )


@main.command()
@click.argument("case_path", type=click.Path())
@_reference_option
@click.option("--out", type=click.Path(), default=None, help="Write the markdown report here.")
@case_options
@settings_options
@handle_errors
def validate(case_path, reference, out, fmt, s_base, **kw):
    """Check a case against reference statistics (exit 1 if tuning is required)."""
    settings = make_settings(**kw)
    case = load_case(case_path, fmt, s_base)
    ref = resolve_reference(reference)
    verdicts = _validate(case.records, ref, settings)
    click.echo(f"seed {settings.seed}")
    click.echo(render_table(verdicts, case.name), nl=False)
    if out:
        Path(out).write_text(render_report(verdicts, case.name, ref.name, settings), encoding="utf-8")
    if all(v.overall is Verdict.NO_DATA for v in verdicts):
        click.echo("warning: no parameter could be judged (reference placeholders or too little data)", err=True)
    if any(v.overall is Verdict.TUNING_REQUIRED for v in verdicts):
        sys.exit(EXIT_TUNING_REQUIRED)


def _parse_target(text: str) -> tuple[ParameterKind, float | None]:
    name, _, kv = text.partition("@")
    return ParameterKind.parse(name.strip()), float(kv) if kv else None


@main.command()
@click.argument("case_path", type=click.Path())
@_reference_option
@click.option("--param", "targets", multiple=True,
              help="Tune this parameter regardless of validation, as NAME or NAME@kV. Repeatable.")
@click.option("--out", type=click.Path(), default=None, help="Tuned case file (default: <case>_tuned.<ext>).")
@click.option("--plan", "plan_path", type=click.Path(), default=None, help="Plan CSV (default: <case>_plan.csv).")
@case_options
@settings_options
@handle_errors
def tune(case_path, reference, targets, out, plan_path, fmt, s_base, **kw):
    """Reassign failing parameters from the reference distributions."""
    settings = make_settings(**kw)
    case = load_case(case_path, fmt, s_base)
    ref = resolve_reference(reference)
    verdicts = _validate(case.records, ref, settings)
    click.echo(f"seed {settings.seed}")

    failures: list[tuple[ParameterKind, VoltageClass]] = []
    if targets:
        by_param = {v.parameter: v for v in verdicts}
        for text in targets:
            try:
                parameter, kv = _parse_target(text)
            except (InvalidInputError, ValueError) as exc:
                raise Abort(f"bad --param {text!r}: {exc}", EXIT_INPUT) from exc
            if kv is not None:
                failures.append((parameter, classify_voltage(kv, settings.kv_tolerance)))
            else:
                failures += [(parameter, e.voltage_class) for e in by_param[parameter].entries]
    else:
        failures = [(v.parameter, vc) for v in verdicts for vc in v.failing_classes]
    if not failures:
        click.echo("nothing to tune: every parameter passes or has no data")
        return

    plan = tune_case(case.records, ref, failures, SeededRng(settings.seed), settings.kv_tolerance)
    tuned = apply_plan(case.records, plan)
    src = Path(case_path)
    out = Path(out) if out else src.with_name(f"{src.stem}_tuned{src.suffix}")
    plan_path = Path(plan_path) if plan_path else src.with_name(f"{src.stem}_plan.csv")
    out.write_text(render_case(case, tuned), encoding="utf-8")
    plan_path.write_text(plan.to_csv(), encoding="utf-8")

    click.echo(f"tuned {len(plan)} values:")
    for parameter, vclass in dict.fromkeys(failures):
        n = sum(1 for e in plan.entries if e.parameter is parameter and e.voltage_class == vclass)
        source = next((e.source for e in plan.entries if e.parameter is parameter and e.voltage_class == vclass), "-")
        click.echo(f"  {parameter.value} at {vclass} kV: {n} branches from {source}")
    click.echo(render_table(_validate(tuned, ref, settings), out.stem), nl=False)
    click.echo(f"wrote {out} and {plan_path}")


@main.command()
@click.argument("bundle_path", type=click.Path())
@click.option("--out", type=click.Path(), default=None, help="Write markdown here instead of stdout.")
@handle_errors
def report(bundle_path, out):
    """Render a stats bundle as markdown."""
    text = render_bundle_summary(load_bundle(bundle_path))
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@main.command()
@click.option("--reference", default="toy", show_default=True,
              help="'toy' or a reference file with every value specified.")
@click.option("--classes", default="115,230,345", show_default=True, help="Comma-separated class voltages.")
@click.option("--per-class", type=int, default=120, show_default=True)
@click.option("--seed", type=int, default=DEFAULT_SEED, envvar="BRANCHSTAT_SEED", show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Branch CSV to write.")
@handle_errors
def synth(reference, classes, per_class, seed, out):
    """Draw a synthetic branch case from a fully specified reference."""
    ref = resolve_reference(reference)
    try:
        kvs = [float(k) for k in classes.split(",") if k.strip()]
    except ValueError as exc:
        raise Abort(f"bad --classes {classes!r}", EXIT_INPUT) from exc
    records = synthesize_case(ref, kvs, per_class, SeededRng(seed))
    Path(out).write_text(write_branch_csv(records), encoding="utf-8")
    click.echo(f"seed {seed}: wrote {len(records)} branches to {out}")


if __name__ == "__main__":
    main()
