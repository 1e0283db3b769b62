"""Domain types for transmission branches and voltage classes.

Units used throughout the package:

- voltage: kV (line-to-line, nominal)
- power: MVA
- impedance: per unit on the stated base, or Ohm
- length: km
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import InvalidInputError

CANONICAL_KV: tuple[float, ...] = (69.0, 115.0, 138.0, 161.0, 230.0, 345.0, 500.0, 735.0)
DEFAULT_KV_TOLERANCE = 0.05


@dataclass(frozen=True)
class BaseQuantities:
    """Voltage and power base of a per-unit system."""

    v_base: float
    s_base: float

    def __post_init__(self) -> None:
        for name in ("v_base", "s_base"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be positive and finite, got {value!r}")


class BranchKind(Enum):
    LINE = "line"
    TRANSFORMER = "xfmr"


@dataclass(frozen=True)
class BranchRecord:
    """One transmission line or two-winding transformer.

    ``x_pu`` and ``r_pu`` are expressed on ``system_base``. Transformers
    carry ``kv_high`` and ``kv_low``; for lines both equal the nominal kV.
    ``length_estimated`` marks lengths filled in from endpoint geography.
    """

    id: str
    kind: BranchKind
    x_pu: float
    r_pu: float
    system_base: BaseQuantities
    kv_high: float
    kv_low: float
    from_bus: str | None = None
    to_bus: str | None = None
    rating_mva: float | None = None
    length_km: float | None = None
    endpoints_geo: tuple[tuple[float, float], tuple[float, float]] | None = None
    length_estimated: bool = field(default=False, compare=True)

    def __post_init__(self) -> None:
        if not math.isfinite(self.x_pu):
            raise InvalidInputError(f"branch {self.id}: x_pu must be finite")
        if not (math.isfinite(self.r_pu) and self.r_pu >= 0):
            raise InvalidInputError(f"branch {self.id}: r_pu must be finite and >= 0")
        if not (self.kv_high > 0 and self.kv_low > 0):
            raise InvalidInputError(f"branch {self.id}: nominal voltages must be positive")
        if self.kind is BranchKind.LINE and self.kv_high != self.kv_low:
            raise InvalidInputError(f"branch {self.id}: a line has a single nominal voltage")
        if self.kv_low > self.kv_high:
            raise InvalidInputError(f"branch {self.id}: kv_low exceeds kv_high")
        if self.rating_mva is not None and not (math.isfinite(self.rating_mva) and self.rating_mva > 0):
            raise InvalidInputError(f"branch {self.id}: rating_mva must be positive")
        if self.length_km is not None:
            if self.kind is BranchKind.TRANSFORMER:
                raise InvalidInputError(f"branch {self.id}: transformers have no length")
            if not (math.isfinite(self.length_km) and self.length_km > 0):
                raise InvalidInputError(f"branch {self.id}: length_km must be positive")
        if self.endpoints_geo is not None:
            for lat, lon in self.endpoints_geo:
                check_coordinate(lat, lon)

    @property
    def nominal_kv(self) -> float:
        """Voltage used for class binning: the high side for transformers."""
        return self.kv_high


def check_coordinate(lat: float, lon: float) -> None:
    if not (-90.0 <= lat <= 90.0):
        raise InvalidInputError(f"latitude {lat} outside [-90, 90]")
    if not (-180.0 <= lon <= 180.0):
        raise InvalidInputError(f"longitude {lon} outside [-180, 180]")


@dataclass(frozen=True, order=True)
class VoltageClass:
    """A canonical nominal voltage level, or ``Other`` carrying the raw kV."""

    kv: float
    canonical: bool = True

    def __str__(self) -> str:
        text = f"{self.kv:g}"
        return text if self.canonical else f"Other({text})"


class ParameterKind(Enum):
    """The seven studied branch parameters, in report order."""

    XFMR_X_PU_OWN_BASE = "XfmrXpuOwnBase"
    LINE_X_OHM_PER_KM = "LineXOhmPerKm"
    XFMR_CAPACITY_MVA = "XfmrCapacityMva"
    XFMR_X_OVER_R = "XfmrXOverR"
    LINE_LENGTH_KM = "LineLengthKm"
    LINE_X_OVER_R = "LineXOverR"
    LINE_CAPACITY_MVA = "LineCapacityMva"

    @property
    def branch_kind(self) -> BranchKind:
        if self.value.startswith("Xfmr"):
            return BranchKind.TRANSFORMER
        return BranchKind.LINE

    @property
    def label(self) -> str:
        return PARAMETER_LABELS[self]

    @property
    def unit(self) -> str:
        return PARAMETER_UNITS[self]

    @classmethod
    def parse(cls, text: str) -> ParameterKind:
        for member in cls:
            if text in (member.value, member.name) or text.lower() == member.value.lower():
                return member
        raise InvalidInputError(f"unknown parameter {text!r}")


PARAMETER_LABELS = {
    ParameterKind.XFMR_X_PU_OWN_BASE: "Transformer X (p.u.)",
    ParameterKind.LINE_X_OHM_PER_KM: "Line X (Ω/km)",
    ParameterKind.XFMR_CAPACITY_MVA: "Transformer Capacity (MVA)",
    ParameterKind.XFMR_X_OVER_R: "Transformer X/R ratio",
    ParameterKind.LINE_LENGTH_KM: "Line Length l (km)",
    ParameterKind.LINE_X_OVER_R: "Line X/R ratio",
    ParameterKind.LINE_CAPACITY_MVA: "Line Capacity (MVA)",
}

PARAMETER_UNITS = {
    ParameterKind.XFMR_X_PU_OWN_BASE: "p.u.",
    ParameterKind.LINE_X_OHM_PER_KM: "ohm/km",
    ParameterKind.XFMR_CAPACITY_MVA: "MVA",
    ParameterKind.XFMR_X_OVER_R: "ratio",
    ParameterKind.LINE_LENGTH_KM: "km",
    ParameterKind.LINE_X_OVER_R: "ratio",
    ParameterKind.LINE_CAPACITY_MVA: "MVA",
}


def classify_voltage(kv: float, tolerance_frac: float = DEFAULT_KV_TOLERANCE) -> VoltageClass:
    """Snap a raw nominal voltage to the closest canonical level.

    Returns ``Other(kv)`` when no canonical level lies within
    ``tolerance_frac`` (relative to the level).
    """
    if not (math.isfinite(kv) and kv > 0):
        raise InvalidInputError(f"voltage must be positive, got {kv!r}")
    if not (0 <= tolerance_frac < 0.5):
        raise InvalidInputError(f"tolerance_frac must lie in [0, 0.5), got {tolerance_frac!r}")
    best = min(CANONICAL_KV, key=lambda level: abs(kv - level) / level)
    if abs(kv - best) / best <= tolerance_frac:
        return VoltageClass(best)
    return VoltageClass(float(kv), canonical=False)
