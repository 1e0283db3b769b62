"""Per-unit conversions and derivation of the seven branch parameters."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import InvalidInputError
from .grid_model import (
    DEFAULT_KV_TOLERANCE,
    BaseQuantities,
    BranchKind,
    BranchRecord,
    ParameterKind,
    VoltageClass,
    classify_voltage,
)


class SkipRecord(Exception):
    """Raised when a record lacks what a derivation needs. Not an error."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


@dataclass(frozen=True)
class ParamValue:
    branch_id: str
    parameter: ParameterKind
    value: float
    voltage_class: VoltageClass


@dataclass
class SkipReport:
    """Per-reason counts of records left out of a parameter population."""

    counts: Counter = field(default_factory=Counter)
    length_estimated: int = 0

    def add(self, reason: str) -> None:
        self.counts[reason] += 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def as_dict(self) -> dict[str, int]:
        out = {k: self.counts[k] for k in sorted(self.counts)}
        out["length_estimated"] = self.length_estimated
        return out


def convert_pu(z_given: float, given: BaseQuantities, new: BaseQuantities) -> float:
    """Refer a per-unit impedance from one (V, S) base to another."""
    for base in (given, new):
        if not (base.v_base > 0 and base.s_base > 0):
            raise InvalidInputError("bases must be positive")
    return z_given * (given.v_base / new.v_base) ** 2 * (new.s_base / given.s_base)


def to_own_base_x(rec: BranchRecord) -> float:
    """Transformer reactance on its own MVA rating, voltage bases at nominal."""
    if rec.kind is not BranchKind.TRANSFORMER:
        raise InvalidInputError(f"branch {rec.id} is not a transformer")
    if rec.rating_mva is None:
        raise SkipRecord("missing_rating")
    if rec.rating_mva <= 0:
        raise InvalidInputError(f"branch {rec.id}: rating must be positive")
    return rec.x_pu * (rec.rating_mva / rec.system_base.s_base)


def from_own_base_x(x_own: float, rating_mva: float, s_base: float) -> float:
    """Inverse of :func:`to_own_base_x`: own-rating reactance back to the system base."""
    if rating_mva <= 0 or s_base <= 0:
        raise InvalidInputError("rating and base must be positive")
    return x_own * (s_base / rating_mva)


def distributed_reactance(rec: BranchRecord) -> float:
    """Line series reactance per km, X_pu * V_B^2 / (l * S_B), in ohm/km."""
    if rec.kind is not BranchKind.LINE:
        raise InvalidInputError(f"branch {rec.id} is not a line")
    if rec.length_km is None or rec.length_km <= 0:
        raise SkipRecord("missing_length")
    base = rec.system_base
    return rec.x_pu * base.v_base ** 2 / (rec.length_km * base.s_base)


def x_over_r(rec: BranchRecord) -> float:
    if rec.r_pu < 0:
        raise InvalidInputError(f"branch {rec.id}: negative resistance")
    if rec.r_pu == 0:
        raise SkipRecord("zero_resistance")
    return rec.x_pu / rec.r_pu


def _rating(rec: BranchRecord) -> float:
    if rec.rating_mva is None:
        raise SkipRecord("missing_rating")
    return rec.rating_mva


def _length(rec: BranchRecord) -> float:
    if rec.length_km is None:
        raise SkipRecord("missing_length")
    return rec.length_km


_DERIVATIONS = {
    ParameterKind.XFMR_X_PU_OWN_BASE: to_own_base_x,
    ParameterKind.LINE_X_OHM_PER_KM: distributed_reactance,
    ParameterKind.XFMR_CAPACITY_MVA: _rating,
    ParameterKind.XFMR_X_OVER_R: x_over_r,
    ParameterKind.LINE_LENGTH_KM: _length,
    ParameterKind.LINE_X_OVER_R: x_over_r,
    ParameterKind.LINE_CAPACITY_MVA: _rating,
}


def parameter_value(rec: BranchRecord, parameter: ParameterKind) -> float:
    """Derive one parameter for one record, raising :class:`SkipRecord` if ineligible."""
    if rec.kind is not parameter.branch_kind:
        raise SkipRecord("wrong_kind")
    if rec.x_pu < 0:
        # series capacitors are not part of any population
        raise SkipRecord("negative_reactance")
    return _DERIVATIONS[parameter](rec)


def extract_parameter(
    records: Iterable[BranchRecord],
    parameter: ParameterKind,
    kv_tolerance: float = DEFAULT_KV_TOLERANCE,
) -> tuple[list[ParamValue], SkipReport]:
    """Derive ``parameter`` for every eligible record, tagged with its voltage class.

    Records of the other branch kind are ignored silently; eligible-kind
    records that cannot be used are counted in the skip report.
    """
    values: list[ParamValue] = []
    skips = SkipReport()
    for rec in records:
        if rec.kind is not parameter.branch_kind:
            continue
        try:
            value = parameter_value(rec, parameter)
        except SkipRecord as skip:
            skips.add(skip.reason)
            continue
        if not math.isfinite(value):
            skips.add("non_finite")
            continue
        if rec.length_estimated and parameter in (ParameterKind.LINE_LENGTH_KM, ParameterKind.LINE_X_OHM_PER_KM):
            skips.length_estimated += 1
        values.append(ParamValue(rec.id, parameter, value, classify_voltage(rec.nominal_kv, kv_tolerance)))
    return values, skips


def set_parameter(rec: BranchRecord, parameter: ParameterKind, value: float) -> BranchRecord:
    """Return a copy of ``rec`` whose ``parameter`` equals ``value``.

    The other six parameters of the branch are held fixed wherever the
    record carries the data to do so: changing a transformer rating keeps
    its own-base reactance and X/R, changing a line length keeps its
    ohm/km and X/R.
    """
    if rec.kind is not parameter.branch_kind:
        raise InvalidInputError(f"{parameter.value} does not apply to branch {rec.id}")
    if not (math.isfinite(value) and value > 0):
        raise InvalidInputError(f"{parameter.value} must be positive, got {value!r}")
    xr = rec.x_pu / rec.r_pu if rec.r_pu > 0 else None

    def with_x(rec: BranchRecord, x_new: float) -> BranchRecord:
        r_new = x_new / xr if xr else rec.r_pu
        return replace(rec, x_pu=x_new, r_pu=r_new)

    s_base = rec.system_base.s_base
    v_base = rec.system_base.v_base
    if parameter is ParameterKind.XFMR_CAPACITY_MVA:
        if rec.rating_mva is None:
            return replace(rec, rating_mva=value)
        x_own = to_own_base_x(rec)
        return with_x(replace(rec, rating_mva=value), from_own_base_x(x_own, value, s_base))
    if parameter is ParameterKind.XFMR_X_PU_OWN_BASE:
        return with_x(rec, from_own_base_x(value, _rating(rec), s_base))
    if parameter in (ParameterKind.XFMR_X_OVER_R, ParameterKind.LINE_X_OVER_R):
        return replace(rec, r_pu=rec.x_pu / value)
    if parameter is ParameterKind.LINE_CAPACITY_MVA:
        return replace(rec, rating_mva=value)
    if parameter is ParameterKind.LINE_X_OHM_PER_KM:
        length = _length(rec)
        return with_x(rec, value * length * s_base / v_base ** 2)
    if parameter is ParameterKind.LINE_LENGTH_KM:
        updated = replace(rec, length_km=value, length_estimated=False)
        if rec.length_km is None:
            return updated
        return with_x(updated, rec.x_pu * value / rec.length_km)
    raise InvalidInputError(f"unsupported parameter {parameter}")


def scale_parameter(records: Iterable[BranchRecord], parameter: ParameterKind, factor: float) -> list[BranchRecord]:
    """Multiply one parameter of every eligible record by ``factor``."""
    out = []
    for rec in records:
        try:
            value = parameter_value(rec, parameter)
        except SkipRecord:
            out.append(rec)
            continue
        out.append(set_parameter(rec, parameter, value * factor))
    return out
