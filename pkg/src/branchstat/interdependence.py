"""Per-class means and the power-law model mean(V) = a * V**b."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import FitFailedError, InsufficientDataError, InvalidInputError
from .grid_model import ParameterKind, VoltageClass
from .per_unit import ParamValue
from .stats import DEFAULT_FENCE, CleanSample, remove_extreme_outliers

DEFAULT_MIN_COUNT = 10
DEFAULT_B_THRESHOLD = 0.15
DEFAULT_R2_THRESHOLD = 0.5
GN_MAX_ITER = 200
GN_TOL = 1e-10


@dataclass(frozen=True)
class ClassMean:
    kv: float
    mean: float
    n: int
    raw_mean: float = math.nan
    n_removed: int = 0


@dataclass(frozen=True)
class ClassMeanSeries:
    parameter: ParameterKind
    points: tuple[ClassMean, ...]

    def __post_init__(self) -> None:
        kvs = [p.kv for p in self.points]
        if any(b <= a for a, b in zip(kvs, kvs[1:])):
            raise InvalidInputError("class voltages must be strictly increasing")

    @property
    def kv(self) -> np.ndarray:
        return np.array([p.kv for p in self.points])

    @property
    def means(self) -> np.ndarray:
        return np.array([p.mean for p in self.points])


@dataclass(frozen=True)
class PowerFit:
    """mean(V) = a * V**b. ``rmse`` and ``r2`` are None for published constants."""

    a: float
    b: float
    rmse: float | None = None
    r2: float | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and self.a > 0 and math.isfinite(self.b)):
            raise InvalidInputError(f"invalid power fit a={self.a!r}, b={self.b!r}")
        if self.rmse is not None and self.rmse < 0:
            raise InvalidInputError("rmse must be nonnegative")
        if self.r2 is not None and self.r2 > 1 + 1e-12:
            raise InvalidInputError("r2 cannot exceed 1")

    def predict(self, kv):
        return self.a * np.power(kv, self.b) if np.ndim(kv) else self.a * float(kv) ** self.b


class DependenceClass(Enum):
    VOLTAGE_DEPENDENT = "VoltageDependent"
    VOLTAGE_INDEPENDENT = "VoltageIndependent"


def group_by_class(values: Iterable[ParamValue]) -> dict[VoltageClass, list[float]]:
    """Canonical-class groups in increasing voltage order; ``Other`` classes dropped."""
    groups: dict[VoltageClass, list[float]] = defaultdict(list)
    for v in values:
        if v.voltage_class.canonical:
            groups[v.voltage_class].append(v.value)
    return dict(sorted(groups.items()))


def clean_groups(
    values: Iterable[ParamValue], fence_multiplier: float = DEFAULT_FENCE
) -> dict[VoltageClass, CleanSample]:
    """Outlier-cleaned sample per canonical class. Groups under 4 values are dropped."""
    return {
        vc: remove_extreme_outliers(group, fence_multiplier)
        for vc, group in group_by_class(values).items()
        if len(group) >= 4
    }


def class_means(
    values: Iterable[ParamValue],
    min_count: int = DEFAULT_MIN_COUNT,
    fence_multiplier: float = DEFAULT_FENCE,
) -> ClassMeanSeries:
    """Outlier-cleaned mean of each canonical voltage class with at least ``min_count`` values."""
    if min_count < 1:
        raise InvalidInputError("min_count must be at least 1")
    values = list(values)
    if not values:
        raise InsufficientDataError("no parameter values")
    parameter = values[0].parameter
    groups = group_by_class(values)
    points = []
    for vc, raw in groups.items():
        if len(raw) < 4:
            continue
        clean = remove_extreme_outliers(raw, fence_multiplier)
        if clean.n >= min_count:
            points.append(ClassMean(vc.kv, clean.mean, clean.n, math.fsum(raw) / len(raw), len(clean.removed_outliers)))
    if not points:
        raise InsufficientDataError(f"no voltage class of {parameter.value} has {min_count} values")
    return ClassMeanSeries(parameter, tuple(points))


def _sse(kv: np.ndarray, y: np.ndarray, a: float, b: float) -> float:
    r = y - a * np.power(kv, b)
    return float(np.dot(r, r))


def log_space_initializer(kv: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Ordinary least squares of ln(mean) on ln(V): returns (a, b)."""
    design = np.column_stack([np.ones_like(kv), np.log(kv)])
    gram = design.T @ design
    if np.linalg.cond(gram) > 1e12:
        raise FitFailedError("singular normal equations: need at least two distinct voltages")
    ln_a, b = np.linalg.solve(gram, design.T @ np.log(y))
    return float(math.exp(ln_a)), float(b)


def gauss_newton_power(
    kv: np.ndarray, y: np.ndarray, a: float, b: float
) -> tuple[float, float, list[float]]:
    """Refine (a, b) by damped Gauss-Newton on the original-space residuals.

    Each step is halved until the SSE does not increase. Returns the final
    parameters and the SSE after every accepted step, starting with the
    initial SSE.
    """
    trace = [_sse(kv, y, a, b)]
    log_kv = np.log(kv)
    for _ in range(GN_MAX_ITER):
        model = a * np.power(kv, b)
        jac = np.column_stack([model / a, model * log_kv])
        gram = jac.T @ jac
        if not np.all(np.isfinite(gram)) or np.linalg.cond(gram) > 1e14:
            raise FitFailedError("singular normal equations in Gauss-Newton step")
        delta = np.linalg.solve(gram, jac.T @ (y - model))
        step = 1.0
        accepted = False
        for _ in range(60):
            a_new, b_new = a + step * delta[0], b + step * delta[1]
            if a_new > 0:
                sse_new = _sse(kv, y, a_new, b_new)
                if sse_new <= trace[-1]:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            break
        change = math.hypot(a_new - a, b_new - b) / math.hypot(a, b)
        a, b = a_new, b_new
        trace.append(sse_new)
        if change < GN_TOL:
            break
    return a, b, trace


def fit_power(series: ClassMeanSeries | tuple[Sequence[float], Sequence[float]]) -> PowerFit:
    """Least-squares fit of mean = a * kv**b, minimizing RMSE in the original space."""
    if isinstance(series, ClassMeanSeries):
        kv, y = series.kv, series.means
    else:
        kv, y = (np.asarray(s, dtype=float) for s in series)
    if kv.size < 3:
        raise InsufficientDataError(f"power fit needs at least 3 voltage classes, got {kv.size}")
    if np.any(kv <= 0):
        raise InvalidInputError("voltages must be positive")
    if np.any(y <= 0):
        raise InvalidInputError("power model needs positive class means")
    a0, b0 = log_space_initializer(kv, y)
    a, b, trace = gauss_newton_power(kv, y, a0, b0)
    sse = trace[-1]
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    return PowerFit(float(a), float(b), math.sqrt(sse / kv.size), float(r2))


def classify_dependence(
    fit: PowerFit,
    b_threshold: float = DEFAULT_B_THRESHOLD,
    r2_threshold: float = DEFAULT_R2_THRESHOLD,
) -> DependenceClass:
    """Voltage independent when the exponent is small or the curve explains little."""
    if abs(fit.b) < b_threshold or (fit.r2 is not None and fit.r2 < r2_threshold):
        return DependenceClass.VOLTAGE_INDEPENDENT
    return DependenceClass.VOLTAGE_DEPENDENT


def bundled_reference():
    """Reference statistics shipped with the package (see :mod:`branchstat.reference`)."""
    from .reference import bundled_reference as _bundled

    return _bundled()
