"""A fully specified illustrative reference and the demo case drawn from it.

The transformer capacity curve (0.172 * V**1.332) and the line X/R
exponent (0.95) are the published values; every other number here is
made up to be plausible and is only meant for demos and tests.
"""

from __future__ import annotations

from importlib import resources

from .grid_model import CANONICAL_KV, ParameterKind
from .interdependence import DependenceClass, PowerFit
from .reference import ParameterReference, ReferenceStats
from .stats import DistFit, Family, GevParams, NormalParams
from .synthesis import SeededRng, pin_mean, synthesize_case

TOY_CLASSES = (115.0, 230.0, 345.0)
TOY_PER_CLASS = 120
TOY_SEED = 42
TOY_CASE_FILE = "toy_case.csv"


def _normal_fits(curve, cv: float) -> dict[float, DistFit]:
    return {kv: DistFit(Family.NORMAL, NormalParams(curve(kv), cv * curve(kv))) for kv in CANONICAL_KV}


def _gev_fits(curve, zeta: float, cv: float) -> dict[float, DistFit]:
    fits = {}
    for kv in CANONICAL_KV:
        m = curve(kv)
        shape = DistFit(Family.GEV, GevParams(zeta, 0.0, cv * m))
        fits[kv] = pin_mean(shape, m)
    return fits


def toy_reference() -> ReferenceStats:
    dep, ind = DependenceClass.VOLTAGE_DEPENDENT, DependenceClass.VOLTAGE_INDEPENDENT
    src = "toy: illustrative values"
    curves = {
        ParameterKind.XFMR_CAPACITY_MVA: PowerFit(0.172, 1.332),
        ParameterKind.XFMR_X_OVER_R: PowerFit(0.6, 0.75),
        ParameterKind.LINE_LENGTH_KM: PowerFit(0.5, 0.8),
        ParameterKind.LINE_X_OVER_R: PowerFit(0.09, 0.95),
        ParameterKind.LINE_CAPACITY_MVA: PowerFit(0.1, 1.5),
    }
    entries = [
        ParameterReference(
            ParameterKind.XFMR_X_PU_OWN_BASE, ind, Family.NORMAL,
            class_fits=_normal_fits(lambda kv: 0.1, 0.25),
            independent_range=(0.0, 0.25), global_mean=0.1, provenance=src,
        ),
        ParameterReference(
            ParameterKind.LINE_X_OHM_PER_KM, ind, Family.NORMAL,
            class_fits=_normal_fits(lambda kv: 0.4, 0.15),
            global_mean=0.4, provenance=src,
        ),
        ParameterReference(
            ParameterKind.XFMR_CAPACITY_MVA, dep, Family.GEV,
            power_fit=curves[ParameterKind.XFMR_CAPACITY_MVA],
            class_fits=_gev_fits(curves[ParameterKind.XFMR_CAPACITY_MVA].predict, 0.1, 0.3), provenance=src,
        ),
        ParameterReference(
            ParameterKind.XFMR_X_OVER_R, dep, Family.GEV,
            power_fit=curves[ParameterKind.XFMR_X_OVER_R],
            class_fits=_gev_fits(curves[ParameterKind.XFMR_X_OVER_R].predict, 0.05, 0.25), provenance=src,
        ),
        ParameterReference(
            ParameterKind.LINE_LENGTH_KM, dep, Family.GEV,
            power_fit=curves[ParameterKind.LINE_LENGTH_KM],
            class_fits=_gev_fits(curves[ParameterKind.LINE_LENGTH_KM].predict, 0.1, 0.35), provenance=src,
        ),
        ParameterReference(
            ParameterKind.LINE_X_OVER_R, dep, Family.NORMAL,
            power_fit=curves[ParameterKind.LINE_X_OVER_R],
            class_fits=_normal_fits(curves[ParameterKind.LINE_X_OVER_R].predict, 0.15), provenance=src,
        ),
        ParameterReference(
            ParameterKind.LINE_CAPACITY_MVA, dep, Family.NORMAL,
            power_fit=curves[ParameterKind.LINE_CAPACITY_MVA],
            class_fits=_normal_fits(curves[ParameterKind.LINE_CAPACITY_MVA].predict, 0.2), provenance=src,
        ),
    ]
    return ReferenceStats("toy", {e.parameter: e for e in entries}, src)


def toy_records(seed: int = TOY_SEED, classes=TOY_CLASSES, per_class: int = TOY_PER_CLASS):
    return synthesize_case(toy_reference(), classes, per_class, SeededRng(seed))


def toy_case_path():
    """Path of the shipped demo case (same as ``toy_records()`` written as CSV)."""
    return resources.files("branchstat") / "data" / TOY_CASE_FILE

