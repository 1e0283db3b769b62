"""Analysis summaries and plot-data CSVs. Plotting itself is left to the user."""

from __future__ import annotations

import csv
import io
from typing import Any, Mapping

import numpy as np

from .grid_model import CANONICAL_KV, ParameterKind
from .pipeline import AnalysisResult
from .reference import num
from .stats import model_mass


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def plot_tables(analysis: AnalysisResult, curve_points: int = 50) -> dict[str, str]:
    """CSV text per figure analog, keyed by file name.

    ``<param>_class_means.csv``   class kV vs cleaned mean
    ``<param>_power_curve.csv``   fitted a * V**b sampled over 69-735 kV
    ``<param>_<kv>_histogram.csv`` bin edges, empirical mass and best-fit model mass
    """
    tables: dict[str, str] = {}
    kv_grid = np.linspace(CANONICAL_KV[0], CANONICAL_KV[-1], curve_points)
    for pa in analysis.parameters:
        name = pa.parameter.value
        if pa.series is not None:
            tables[f"{name}_class_means.csv"] = _csv(
                ["kv", "mean", "raw_mean", "n"],
                [[num(p.kv), num(p.mean), num(p.raw_mean), p.n] for p in pa.series.points],
            )
        if pa.power_fit is not None:
            tables[f"{name}_power_curve.csv"] = _csv(
                ["kv", "fitted"], [[num(kv), num(pa.power_fit.predict(kv))] for kv in kv_grid.tolist()]
            )
        for c in pa.classes:
            if c.histogram is None:
                continue
            edges = c.histogram.edges
            model = model_mass(c.fits[0].params, edges) if c.fits else [None] * c.histogram.n_bins
            rows = [
                [num(lo), num(hi), num(m), num(q)]
                for lo, hi, m, q in zip(edges, edges[1:], c.histogram.mass, model)
            ]
            family = c.fits[0].family.value if c.fits else ""
            tables[f"{name}_{c.voltage_class.kv:g}_histogram.csv"] = _csv(
                ["bin_lo", "bin_hi", "mass", f"model_mass_{family}" if family else "model_mass"], rows
            )
    return tables


def _f(text: str | None, digits: int = 4) -> str:
    if text is None:
        return "-"
    return f"{float(text):.{digits}g}"


def render_bundle_summary(bundle: Mapping[str, Any]) -> str:
    """Markdown summary of a stats bundle."""
    settings = bundle.get("settings", {})
    out = [f"# Branch statistics: {bundle.get('case_name', '')}", ""]
    if settings:
        out.append(
            "Settings: "
            + ", ".join(f"{k}={_f(v, 15)}" for k, v in settings.items())
            + ". KL divergences in nats."
        )
        out.append("")
    out += [
        "| Parameter | status | dependence | a | b | r2 | family |",
        "|---|---|---|---:|---:|---:|---|",
    ]
    sections = bundle.get("parameters", [])
    for s in sections:
        label = ParameterKind.parse(s["parameter"]).label
        ref = s.get("reference") or {}
        pf = s.get("power_fit") or ref.get("power_fit") or {}
        out.append(
            f"| {label} | {s.get('status', '')} | {s.get('dependence') or ref.get('dependence') or '-'} "
            f"| {_f(pf.get('a'))} | {_f(pf.get('b'))} | {_f(pf.get('r2'), 3)} "
            f"| {s.get('family') or ref.get('family') or '-'} |"
        )
    for s in sections:
        label = ParameterKind.parse(s["parameter"]).label
        out += ["", f"## {label}", ""]
        for note in s.get("notes", []):
            out.append(f"- {note}")
        skips = {k: v for k, v in (s.get("skips") or {}).items() if v != "0"}
        if skips:
            out.append("- skipped: " + ", ".join(f"{k} {v}" for k, v in skips.items()))
        classes = s.get("classes", [])
        if classes:
            out += [
                "",
                "| class kV | n (raw) | n | removed | mean | best family | KL | runner-up | KL |",
                "|---:|---:|---:|---:|---:|---|---:|---|---:|",
            ]
            for c in classes:
                fits = c.get("fits", [])
                first = fits[0] if fits else {}
                second = fits[1] if len(fits) > 1 else {}
                out.append(
                    f"| {_f(c['kv'])} | {c['n_raw']} | {c['n']} | {len(c.get('removed_outliers', []))} "
                    f"| {_f(c['mean'])} | {first.get('family', '-')} | {_f(first.get('kl_nats'), 3)} "
                    f"| {second.get('family', '-')} | {_f(second.get('kl_nats'), 3)} |"
                )
    return "\n".join(out) + "\n"
