"""Seeded inverse-CDF samplers and the tuning procedure.

Uniform stream
--------------
:class:`SeededRng` draws raw 64-bit words from numpy's PCG64 bit
generator (seeded through ``SeedSequence``; both have a fixed,
version-stable output) and maps each word ``w`` to
``((w >> 11) + 0.5) / 2**53``, which lies strictly inside (0, 1).
For seed 1 the first five variates are::

    0.5118216247002567, 0.9504636963259354, 0.1441596127196338,
    0.948649447137244, 0.3118314520104855

Independent sub-streams come from :meth:`SeededRng.spawn`, which builds
``SeedSequence(seed, spawn_key=key)`` for an integer key tuple.

Normal quantile
---------------
Wichura's algorithm AS 241 (PPND16): rational approximations on three
ranges, accurate to about 1e-16 relative.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CannotTuneError, InvalidInputError, NoFiniteMeanError
from .grid_model import (
    DEFAULT_KV_TOLERANCE,
    BaseQuantities,
    BranchKind,
    BranchRecord,
    CANONICAL_KV,
    ParameterKind,
    VoltageClass,
)
from .per_unit import extract_parameter, from_own_base_x, set_parameter
from .reference import ReferenceStats
from .stats import DistFit, ExponentialParams, GevParams, NormalParams, Params

DEFAULT_SEED = 42
MAX_RESAMPLE = 100
_MASK64 = (1 << 64) - 1


class SeededRng:
    """Deterministic stream of uniform variates in (0, 1)."""

    def __init__(self, seed: int = DEFAULT_SEED, key: tuple[int, ...] = ()):
        self.seed = int(seed) & _MASK64
        self.key = tuple(int(k) & _MASK64 for k in key)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self._bits = np.random.PCG64(seq)

    def uniform(self, n: int) -> np.ndarray:
        raw = np.asarray(self._bits.random_raw(n), dtype=np.uint64)
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53

    def spawn(self, *key: int) -> SeededRng:
        return SeededRng(self.seed, self.key + tuple(key))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, key={self.key})"


# AS 241 coefficients, lowest order first
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3, 1.3731693765509461125e4,
      4.5921953931549871457e4, 6.7265770927008700853e4, 3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4, 5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0, 3.64784832476320460504e0,
      1.27045825245236838258e0, 2.41780725177450611770e-1, 2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4, 1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0, 2.96560571828504891230e-1,
      2.65321895265761230930e-2, 1.24266094738807843860e-3, 2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7, 2.04426310338993978564e-15)


def _poly(coef: Sequence[float], x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    for c in reversed(coef):
        out = out * x + c
    return out


def normal_quantile(p) -> np.ndarray | float:
    """Standard Normal quantile for p in (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0) & (arr < 1)):
        raise InvalidInputError("probabilities must lie strictly inside (0, 1)")
    q = arr - 0.5
    out = np.empty_like(arr)
    central = np.abs(q) <= 0.425
    r = 0.180625 - q[central] ** 2
    out[central] = q[central] * _poly(_A, r) / _poly(_B, r)
    tail = ~central
    r = np.sqrt(-np.log(np.minimum(arr[tail], 1.0 - arr[tail])))
    near = r <= 5.0
    x = np.where(
        near,
        _poly(_C, r - 1.6) / _poly(_D, r - 1.6),
        _poly(_E, r - 5.0) / _poly(_F, r - 5.0),
    )
    out[tail] = np.where(q[tail] < 0, -x, x)
    return float(out) if out.ndim == 0 else out


def normal_from_uniform(params: NormalParams, u) -> np.ndarray:
    return params.mu + params.sigma * np.asarray(normal_quantile(u))


def exponential_from_uniform(params: ExponentialParams, u) -> np.ndarray:
    return -np.log1p(-np.asarray(u, dtype=float)) / params.rate


def gev_from_uniform(params: GevParams, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return params.mu + params.sigma * (np.power(-np.log(u), -params.zeta) - 1.0) / params.zeta


def quantile(params: Params, u) -> np.ndarray:
    if isinstance(params, NormalParams):
        return normal_from_uniform(params, u)
    if isinstance(params, ExponentialParams):
        return exponential_from_uniform(params, u)
    return gev_from_uniform(params, u)


def sample_normal(params: NormalParams, rng: SeededRng, n: int) -> np.ndarray:
    return normal_from_uniform(params, rng.uniform(_count(n)))


def sample_exponential(params: ExponentialParams, rng: SeededRng, n: int) -> np.ndarray:
    return exponential_from_uniform(params, rng.uniform(_count(n)))


def sample_gev(params: GevParams, rng: SeededRng, n: int) -> np.ndarray:
    """x = mu + sigma * ((-ln u) ** -zeta - 1) / zeta."""
    return gev_from_uniform(params, rng.uniform(_count(n)))


def sample(params: Params, rng: SeededRng, n: int) -> np.ndarray:
    return quantile(params, rng.uniform(_count(n)))


def _count(n: int) -> int:
    if n < 1:
        raise InvalidInputError("sample size must be at least 1")
    return int(n)


def pin_mean(fit: DistFit, target_mean: float) -> DistFit:
    """Move a fitted distribution so its mean equals ``target_mean``, keeping its shape.

    Normal shifts ``mu``; Exponential sets ``rate = 1 / target``; GEV
    shifts ``mu`` with ``zeta`` and ``sigma`` fixed. The returned fit has
    no data diagnostics.
    """
    params = fit.params
    if isinstance(params, NormalParams):
        new = NormalParams(target_mean, params.sigma)
    elif isinstance(params, ExponentialParams):
        if not target_mean > 0:
            raise InvalidInputError("exponential mean must be positive")
        new = ExponentialParams(1.0 / target_mean)
    else:
        if params.zeta >= 1:
            raise NoFiniteMeanError(f"GEV with shape {params.zeta} has no finite mean")
        offset = params.sigma * (math.gamma(1.0 - params.zeta) - 1.0) / params.zeta
        new = GevParams(params.zeta, target_mean - offset, params.sigma)
    return DistFit(fit.family, new)


def describe(fit: DistFit) -> str:
    p = fit.params
    if isinstance(p, NormalParams):
        return f"Normal(mu={p.mu:.6g}, sigma={p.sigma:.6g})"
    if isinstance(p, ExponentialParams):
        return f"Exponential(rate={p.rate:.6g})"
    return f"GEV(zeta={p.zeta:.6g}, mu={p.mu:.6g}, sigma={p.sigma:.6g})"


# --- tuning -------------------------------------------------------------------

@dataclass(frozen=True)
class PlanEntry:
    branch_id: str
    parameter: ParameterKind
    old: float
    new: float
    voltage_class: VoltageClass
    source: str


@dataclass(frozen=True)
class TuningPlan:
    entries: tuple[PlanEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["branch_id", "parameter", "old", "new", "class_kv"])
        for e in self.entries:
            writer.writerow([e.branch_id, e.parameter.value, repr(e.old), repr(e.new), f"{e.voltage_class.kv:g}"])
        return buf.getvalue()


def stream_key(parameter: ParameterKind, kv: float) -> tuple[int, int]:
    """Sub-stream key of one (parameter, class) pair."""
    return list(ParameterKind).index(parameter), int(round(kv * 1000))


def draw_positive(params: Params, rng: SeededRng, what: str) -> float:
    """One sample, redrawn until positive (at most ``MAX_RESAMPLE`` attempts)."""
    for _ in range(MAX_RESAMPLE):
        value = float(quantile(params, rng.uniform(1))[0])
        if math.isfinite(value) and value > 0:
            return value
    raise InvalidInputError(f"{what}: no positive sample in {MAX_RESAMPLE} attempts")


def tune_case(
    records: Sequence[BranchRecord],
    reference: ReferenceStats,
    failures: Iterable[tuple[ParameterKind, VoltageClass]],
    rng: SeededRng,
    kv_tolerance: float = DEFAULT_KV_TOLERANCE,
) -> TuningPlan:
    """Reassign failing (parameter, class) values from the reference distribution.

    The distribution is the reference family at that class, pinned to the
    reference mean for the class voltage. Records are not modified; apply
    the plan with :func:`apply_plan`.
    """
    seen: set[tuple[ParameterKind, VoltageClass]] = set()
    ordered = []
    for item in failures:
        if item not in seen:
            seen.add(item)
            ordered.append(item)

    entries: list[PlanEntry] = []
    for parameter, vclass in ordered:
        entry = reference.get(parameter)
        if entry is None:
            raise CannotTuneError(f"{parameter.value}: not in the reference", parameter)
        target = entry.target_mean(vclass.kv)
        dist = pin_mean(entry.class_fit(vclass.kv), target)
        source = describe(dist)
        stream = rng.spawn(*stream_key(parameter, vclass.kv))
        values, _ = extract_parameter(records, parameter, kv_tolerance)
        for pv in values:
            if pv.voltage_class != vclass:
                continue
            new = draw_positive(dist.params, stream, f"{parameter.value} at {vclass}")
            entries.append(PlanEntry(pv.branch_id, parameter, pv.value, new, vclass, source))
    return TuningPlan(tuple(entries))


def apply_plan(records: Sequence[BranchRecord], plan: TuningPlan) -> list[BranchRecord]:
    """Apply plan entries in order; returns new records."""
    index = {rec.id: i for i, rec in enumerate(records)}
    out = list(records)
    for e in plan.entries:
        i = index[e.branch_id]
        out[i] = set_parameter(out[i], e.parameter, e.new)
    return out


# --- synthetic cases ----------------------------------------------------------

def _lower_level(kv: float) -> float:
    lower = [level for level in CANONICAL_KV if level < kv]
    return lower[-1] if lower else round(kv / 5.0, 1)


def synthesize_case(
    reference: ReferenceStats,
    classes: Sequence[float],
    per_class: int,
    rng: SeededRng,
    s_base: float = 100.0,
) -> list[BranchRecord]:
    """Draw a case whose seven parameters follow ``reference``.

    Every class gets ``per_class`` transformers (high side at the class
    voltage) and ``per_class`` lines. Each parameter is drawn from the
    reference family pinned to the reference mean at that class.
    """
    def draws(parameter: ParameterKind, kv: float) -> list[float]:
        entry = reference.get(parameter)
        if entry is None:
            raise CannotTuneError(f"{parameter.value}: not in the reference", parameter)
        dist = pin_mean(entry.class_fit(kv), entry.target_mean(kv))
        stream = rng.spawn(*stream_key(parameter, kv))
        return [draw_positive(dist.params, stream, parameter.value) for _ in range(per_class)]

    records: list[BranchRecord] = []
    for kv in classes:
        kv = float(kv)
        tag = f"{kv:g}"
        cap = draws(ParameterKind.XFMR_CAPACITY_MVA, kv)
        x_own = draws(ParameterKind.XFMR_X_PU_OWN_BASE, kv)
        t_xr = draws(ParameterKind.XFMR_X_OVER_R, kv)
        low = _lower_level(kv)
        for i in range(per_class):
            x = from_own_base_x(x_own[i], cap[i], s_base)
            records.append(BranchRecord(
                id=f"T{tag}-{i + 1:03d}", kind=BranchKind.TRANSFORMER,
                from_bus=f"{tag}H{i + 1}", to_bus=f"{tag}L{i + 1}",
                x_pu=x, r_pu=x / t_xr[i], system_base=BaseQuantities(kv, s_base),
                rating_mva=cap[i], kv_high=kv, kv_low=low,
            ))
        length = draws(ParameterKind.LINE_LENGTH_KM, kv)
        ohm_km = draws(ParameterKind.LINE_X_OHM_PER_KM, kv)
        l_xr = draws(ParameterKind.LINE_X_OVER_R, kv)
        l_cap = draws(ParameterKind.LINE_CAPACITY_MVA, kv)
        for i in range(per_class):
            x = ohm_km[i] * length[i] * s_base / kv ** 2
            records.append(BranchRecord(
                id=f"L{tag}-{i + 1:03d}", kind=BranchKind.LINE,
                from_bus=f"{tag}A{i + 1}", to_bus=f"{tag}B{i + 1}",
                x_pu=x, r_pu=x / l_xr[i], system_base=BaseQuantities(kv, s_base),
                rating_mva=l_cap[i], kv_high=kv, kv_low=kv, length_km=length[i],
            ))
    return records
