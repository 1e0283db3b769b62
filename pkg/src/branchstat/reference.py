"""Reference statistics: the envelope a case is validated against and the source for tuning.

A reference holds, per parameter, its voltage dependence, a power-law
fit of the class means, the preferred distribution family with per-class
fits, and for voltage-independent parameters an admissible range and/or
a global mean. Values that are not known are flagged in ``placeholders``
and never used to pass or tune a parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import CannotTuneError, InvalidInputError
from .grid_model import ParameterKind
from .interdependence import DependenceClass, PowerFit
from .stats import DistFit, ExponentialParams, Family, GevParams, NormalParams

SCHEMA_VERSION = "1"

POWER_A = "power_fit.a"
POWER_B = "power_fit.b"
CLASS_FITS = "class_fits"
GLOBAL_MEAN = "global_mean"
INDEPENDENT_RANGE = "independent_range"

PLACEHOLDER_FIELDS = (POWER_A, POWER_B, CLASS_FITS, GLOBAL_MEAN, INDEPENDENT_RANGE)


@dataclass(frozen=True, eq=True)
class ParameterReference:
    """Reference entry for one parameter.

    ``independent_range`` is the half-open interval (lo, hi].
    ``class_fits`` maps nominal kV to the fit of ``family`` at that class.
    """

    parameter: ParameterKind
    dependence: DependenceClass
    family: Family | None = None
    power_fit: PowerFit | None = None
    class_fits: Mapping[float, DistFit] = field(default_factory=dict)
    independent_range: tuple[float, float] | None = None
    global_mean: float | None = None
    placeholders: frozenset[str] = frozenset()
    provenance: str = ""

    def __post_init__(self) -> None:
        unknown = set(self.placeholders) - set(PLACEHOLDER_FIELDS)
        if unknown:
            raise InvalidInputError(f"unknown placeholder field(s): {sorted(unknown)}")
        if self.dependence is DependenceClass.VOLTAGE_DEPENDENT and self.power_fit is None:
            raise InvalidInputError(f"{self.parameter.value}: voltage-dependent entry needs a power fit")
        if self.dependence is DependenceClass.VOLTAGE_INDEPENDENT and (
            self.independent_range is None and self.global_mean is None
        ):
            raise InvalidInputError(f"{self.parameter.value}: voltage-independent entry needs a range or global mean")
        if self.independent_range is not None and not self.independent_range[0] < self.independent_range[1]:
            raise InvalidInputError("independent_range must satisfy lo < hi")
        for fit in self.class_fits.values():
            if self.family is not None and fit.family is not self.family:
                raise InvalidInputError("class fits must belong to the reference family")

    def known(self, name: str) -> bool:
        return name not in self.placeholders

    @property
    def power_fit_usable(self) -> bool:
        return self.power_fit is not None and self.known(POWER_A) and self.known(POWER_B)

    @property
    def range_usable(self) -> bool:
        return self.independent_range is not None and self.known(INDEPENDENT_RANGE)

    @property
    def global_mean_usable(self) -> bool:
        return self.global_mean is not None and self.known(GLOBAL_MEAN)

    @property
    def class_fits_usable(self) -> bool:
        return bool(self.class_fits) and self.known(CLASS_FITS)

    def target_mean(self, kv: float) -> float:
        """Mean a tuned class should have: the power curve, else the range midpoint or global mean."""
        if self.dependence is DependenceClass.VOLTAGE_DEPENDENT:
            if not self.power_fit_usable:
                raise CannotTuneError(f"{self.parameter.value}: reference power fit is a placeholder", self.parameter)
            return self.power_fit.predict(kv)
        if self.range_usable:
            lo, hi = self.independent_range
            return 0.5 * (lo + hi)
        if self.global_mean_usable:
            return self.global_mean
        raise CannotTuneError(f"{self.parameter.value}: reference range and mean are placeholders", self.parameter)

    def class_fit(self, kv: float) -> DistFit:
        """Fit at ``kv``, or at the class nearest in log-voltage when ``kv`` has none."""
        if not self.class_fits_usable:
            raise CannotTuneError(f"{self.parameter.value}: reference distribution is a placeholder", self.parameter)
        nearest = min(self.class_fits, key=lambda k: (abs(math.log(k / kv)), k))
        return self.class_fits[nearest]


@dataclass(frozen=True)
class ReferenceStats:
    name: str
    entries: Mapping[ParameterKind, ParameterReference]
    provenance: str = ""

    def get(self, parameter: ParameterKind) -> ParameterReference | None:
        return self.entries.get(parameter)


def bundled_reference() -> ReferenceStats:
    """Published fit constants for real transmission networks.

    Known: transformer capacity 0.172 * V**1.332 MVA, line X/R exponent
    0.95, own-rating transformer X within (0, 0.25] p.u., and the
    best-fitting family of each parameter. Everything else is a
    placeholder and yields "no data" on validation.
    """
    dep, ind = DependenceClass.VOLTAGE_DEPENDENT, DependenceClass.VOLTAGE_INDEPENDENT
    src = "bundled: published fit constants"
    no_fits = frozenset({CLASS_FITS})
    unknown_curve = frozenset({POWER_A, POWER_B, CLASS_FITS})
    entries = [
        ParameterReference(
            ParameterKind.XFMR_X_PU_OWN_BASE, ind, Family.NORMAL,
            independent_range=(0.0, 0.25), placeholders=no_fits, provenance=src,
        ),
        ParameterReference(
            # the published exponential fit concerns the lines' per-unit X
            ParameterKind.LINE_X_OHM_PER_KM, ind, Family.EXPONENTIAL,
            global_mean=0.4, placeholders=frozenset({GLOBAL_MEAN, CLASS_FITS}), provenance=src,
        ),
        ParameterReference(
            ParameterKind.XFMR_CAPACITY_MVA, dep, Family.GEV,
            power_fit=PowerFit(0.172, 1.332), placeholders=no_fits, provenance=src,
        ),
        ParameterReference(
            ParameterKind.XFMR_X_OVER_R, dep, Family.GEV,
            power_fit=PowerFit(1.0, 0.6), placeholders=unknown_curve, provenance=src,
        ),
        ParameterReference(
            ParameterKind.LINE_LENGTH_KM, dep, Family.GEV,
            power_fit=PowerFit(1.0, 0.8), placeholders=unknown_curve, provenance=src,
        ),
        ParameterReference(
            ParameterKind.LINE_X_OVER_R, dep, Family.NORMAL,
            power_fit=PowerFit(0.1, 0.95), placeholders=frozenset({POWER_A, CLASS_FITS}), provenance=src,
        ),
        ParameterReference(
            ParameterKind.LINE_CAPACITY_MVA, dep, Family.NORMAL,
            power_fit=PowerFit(1.0, 1.0), placeholders=unknown_curve, provenance=src,
        ),
    ]
    return ReferenceStats("bundled", {e.parameter: e for e in entries}, src)


# --- serialization ----------------------------------------------------------

def num(value: float | None) -> str | None:
    """Decimal string with 17 significant digits; round-trips every double."""
    if value is None:
        return None
    return format(float(value), ".17g")


def unnum(text: str | None) -> float | None:
    return None if text is None else float(text)


def params_to_dict(params) -> dict[str, str]:
    if isinstance(params, NormalParams):
        return {"mu": num(params.mu), "sigma": num(params.sigma)}
    if isinstance(params, ExponentialParams):
        return {"rate": num(params.rate)}
    return {"zeta": num(params.zeta), "mu": num(params.mu), "sigma": num(params.sigma)}


def params_from_dict(family: Family, data: Mapping[str, str]):
    if family is Family.NORMAL:
        return NormalParams(float(data["mu"]), float(data["sigma"]))
    if family is Family.EXPONENTIAL:
        return ExponentialParams(float(data["rate"]))
    return GevParams(float(data["zeta"]), float(data["mu"]), float(data["sigma"]))


def fit_to_dict(fit: DistFit) -> dict[str, Any]:
    return {
        "family": fit.family.value,
        "params": params_to_dict(fit.params),
        "log_likelihood": num(fit.log_likelihood),
        "kl_nats": num(fit.kl_to_empirical),
    }


def fit_from_dict(data: Mapping[str, Any]) -> DistFit:
    family = Family(data["family"])
    return DistFit(
        family, params_from_dict(family, data["params"]),
        unnum(data.get("log_likelihood")), unnum(data.get("kl_nats")),
    )


def power_fit_to_dict(fit: PowerFit | None) -> dict[str, str | None] | None:
    if fit is None:
        return None
    return {"a": num(fit.a), "b": num(fit.b), "rmse": num(fit.rmse), "r2": num(fit.r2)}


def power_fit_from_dict(data: Mapping[str, Any] | None) -> PowerFit | None:
    if data is None:
        return None
    return PowerFit(float(data["a"]), float(data["b"]), unnum(data.get("rmse")), unnum(data.get("r2")))


def entry_to_dict(entry: ParameterReference) -> dict[str, Any]:
    return {
        "dependence": entry.dependence.value,
        "family": entry.family.value if entry.family else None,
        "power_fit": power_fit_to_dict(entry.power_fit),
        "class_fits": [
            {"kv": num(kv), **fit_to_dict(fit)} for kv, fit in sorted(entry.class_fits.items())
        ],
        "independent_range": None if entry.independent_range is None else [num(v) for v in entry.independent_range],
        "global_mean": num(entry.global_mean),
        "placeholders": sorted(entry.placeholders),
        "provenance": entry.provenance,
    }


def entry_from_dict(parameter: ParameterKind, data: Mapping[str, Any]) -> ParameterReference:
    rng = data.get("independent_range")
    return ParameterReference(
        parameter=parameter,
        dependence=DependenceClass(data["dependence"]),
        family=Family(data["family"]) if data.get("family") else None,
        power_fit=power_fit_from_dict(data.get("power_fit")),
        class_fits={float(item["kv"]): fit_from_dict(item) for item in data.get("class_fits", [])},
        independent_range=None if rng is None else (float(rng[0]), float(rng[1])),
        global_mean=unnum(data.get("global_mean")),
        placeholders=frozenset(data.get("placeholders", [])),
        provenance=data.get("provenance", ""),
    )


def reference_to_dict(reference: ReferenceStats) -> dict[str, Any]:
    """Reference-only document in the stats-bundle schema."""
    return {
        "schema_version": SCHEMA_VERSION,
        "case_name": reference.name,
        "provenance": reference.provenance,
        "settings": {},
        "parameters": [
            {"parameter": p.value, "status": "reference", "reference": entry_to_dict(reference.entries[p])}
            for p in ParameterKind if p in reference.entries
        ],
    }


def reference_from_dict(data: Mapping[str, Any]) -> ReferenceStats:
    if str(data.get("schema_version")) != SCHEMA_VERSION:
        raise InvalidInputError(f"unsupported schema_version {data.get('schema_version')!r}")
    entries = {}
    for section in data.get("parameters", []):
        if section.get("reference") is None:
            continue
        parameter = ParameterKind.parse(section["parameter"])
        entries[parameter] = entry_from_dict(parameter, section["reference"])
    name = data.get("case_name", "")
    provenance = data.get("provenance") or f"analyze run {name}"
    return ReferenceStats(name, entries, provenance)
