"""Outlier removal, histograms, distribution fits and KL-based ranking.

KL divergences are in nats. Model probabilities per bin come from the
fitted CDF differenced over the histogram edges, renormalized to the
sample range and smoothed with ``eps`` so every bin is strictly positive.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, Union

import numpy as np
from scipy import optimize, special

from .errors import (
    DegenerateSampleError,
    FitFailedError,
    InsufficientDataError,
    InvalidInputError,
)

log = logging.getLogger(__name__)

DEFAULT_BINS = 50
DEFAULT_FENCE = 3.0
KL_EPS = 1e-9
EULER_GAMMA = 0.5772
GEV_MIN_SAMPLES = 20
GEV_ZETA_FLOOR = 1e-6


@dataclass(frozen=True)
class CleanSample:
    """A sample after box-plot extreme-outlier removal."""

    values: tuple[float, ...]
    removed_outliers: tuple[float, ...]
    q1: float
    q3: float
    iqr: float
    fence_lo: float
    fence_hi: float
    fence_multiplier: float = DEFAULT_FENCE

    @property
    def n(self) -> int:
        return len(self.values)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def mean(self) -> float:
        return math.fsum(self.values) / len(self.values)


@dataclass(frozen=True)
class Histogram:
    edges: tuple[float, ...]
    mass: tuple[float, ...]
    n: int

    def __post_init__(self) -> None:
        if len(self.edges) != len(self.mass) + 1:
            raise InvalidInputError("histogram needs one more edge than bins")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise InvalidInputError("histogram edges must be strictly increasing")
        if any(m < 0 for m in self.mass) or abs(math.fsum(self.mass) - 1.0) > 1e-12:
            raise InvalidInputError("histogram mass must be nonnegative and sum to 1")

    @property
    def n_bins(self) -> int:
        return len(self.mass)


class Family(Enum):
    NORMAL = "Normal"
    EXPONENTIAL = "Exponential"
    GEV = "Gev"


@dataclass(frozen=True)
class NormalParams:
    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidInputError(f"invalid Normal parameters {self}")

    @property
    def mean(self) -> float:
        return self.mu


@dataclass(frozen=True)
class ExponentialParams:
    rate: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise InvalidInputError(f"invalid Exponential rate {self.rate!r}")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate


@dataclass(frozen=True)
class GevParams:
    """Shape ``zeta`` (nonzero), location ``mu``, scale ``sigma``."""

    zeta: float
    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.zeta, self.mu, self.sigma)):
            raise InvalidInputError(f"GEV parameters must be finite: {self}")
        if self.sigma <= 0:
            raise InvalidInputError(f"GEV scale must be positive, got {self.sigma!r}")
        if self.zeta == 0:
            raise InvalidInputError("GEV shape must be nonzero")

    @property
    def mean(self) -> float:
        if self.zeta >= 1:
            return math.inf
        return self.mu + self.sigma * (math.gamma(1 - self.zeta) - 1) / self.zeta


Params = Union[NormalParams, ExponentialParams, GevParams]

_FAMILY_OF = {NormalParams: Family.NORMAL, ExponentialParams: Family.EXPONENTIAL, GevParams: Family.GEV}


@dataclass(frozen=True)
class DistFit:
    """A fitted family with its log-likelihood and KL divergence to the data histogram.

    Both diagnostics are ``None`` for reference entries not fitted to data.
    """

    family: Family
    params: Params
    log_likelihood: float | None = None
    kl_to_empirical: float | None = None

    def __post_init__(self) -> None:
        if _FAMILY_OF[type(self.params)] is not self.family:
            raise InvalidInputError(f"{type(self.params).__name__} does not match family {self.family.value}")
        if self.kl_to_empirical is not None and self.kl_to_empirical < -1e-12:
            raise InvalidInputError(f"negative KL divergence {self.kl_to_empirical}")


# --- outliers and histograms --------------------------------------------------

def remove_extreme_outliers(values: Iterable[float], fence_multiplier: float = DEFAULT_FENCE) -> CleanSample:
    """Drop values beyond ``fence_multiplier`` interquartile ranges from the quartiles.

    Quartiles interpolate linearly at position ``q * (n - 1)`` of the
    sorted sample.
    """
    data = np.sort(np.asarray(list(values), dtype=float))
    if data.size < 4:
        raise InsufficientDataError(f"outlier removal needs at least 4 values, got {data.size}")
    if not np.all(np.isfinite(data)):
        raise InvalidInputError("values must be finite")
    if fence_multiplier <= 0:
        raise InvalidInputError("fence multiplier must be positive")
    q1, q3 = np.quantile(data, [0.25, 0.75], method="linear")
    iqr = q3 - q1
    lo, hi = q1 - fence_multiplier * iqr, q3 + fence_multiplier * iqr
    keep = (data >= lo) & (data <= hi)
    return CleanSample(
        values=tuple(data[keep].tolist()),
        removed_outliers=tuple(data[~keep].tolist()),
        q1=float(q1), q3=float(q3), iqr=float(iqr),
        fence_lo=float(lo), fence_hi=float(hi),
        fence_multiplier=float(fence_multiplier),
    )


def _as_array(values: CleanSample | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(values, CleanSample):
        return values.array()
    return np.asarray(values, dtype=float)


def build_histogram(values: CleanSample | Sequence[float], n_bins: int = DEFAULT_BINS) -> Histogram:
    """Equal-width histogram over [min, max]; the top edge belongs to the last bin."""
    data = _as_array(values)
    if n_bins < 2:
        raise InvalidInputError("need at least 2 bins")
    if data.size < 2 or data.min() == data.max():
        raise DegenerateSampleError("histogram needs at least two distinct values")
    counts, edges = np.histogram(data, bins=n_bins, range=(data.min(), data.max()))
    return Histogram(tuple(edges.tolist()), tuple((counts / data.size).tolist()), int(data.size))


def kl_divergence(p: Histogram, q: Histogram | Sequence[float]) -> float:
    """Sum of p_i * ln(p_i / q_i) over bins where p_i > 0."""
    if isinstance(q, Histogram):
        if q.edges != p.edges:
            raise InvalidInputError("histograms have different edges")
        q_mass = np.asarray(q.mass)
    else:
        q_mass = np.asarray(q, dtype=float)
        if q_mass.shape != (p.n_bins,):
            raise InvalidInputError(f"expected {p.n_bins} model probabilities, got {q_mass.size}")
    if abs(q_mass.sum() - 1.0) > 1e-9 or np.any(q_mass < 0):
        raise InvalidInputError("model probabilities must be nonnegative and sum to 1")
    p_mass = np.asarray(p.mass)
    support = p_mass > 0
    if np.any(q_mass[support] <= 0):
        raise InvalidInputError("model probability is zero where the data has mass")
    terms = p_mass[support] * np.log(p_mass[support] / q_mass[support])
    return math.fsum(terms.tolist())


# --- distribution functions ---------------------------------------------------

def _gev_t(x: np.ndarray, params: GevParams) -> np.ndarray:
    return 1.0 + params.zeta * (x - params.mu) / params.sigma


def gev_cdf(x, params: GevParams):
    """GEV CDF exp(-(1 + zeta (x - mu) / sigma) ** (-1 / zeta)).

    Outside the support the CDF is 0 below a lower bound (zeta > 0) and 1
    above an upper bound (zeta < 0).
    """
    if params.sigma <= 0:
        raise InvalidInputError("GEV scale must be positive")
    arr = np.asarray(x, dtype=float)
    t = _gev_t(arr, params)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        inside = np.exp(-np.power(np.where(t > 0, t, 1.0), -1.0 / params.zeta))
    outside = 0.0 if params.zeta > 0 else 1.0
    out = np.where(t > 0, inside, outside)
    return float(out) if out.ndim == 0 else out


def cdf(params: Params, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if isinstance(params, NormalParams):
        return special.ndtr((arr - params.mu) / params.sigma)
    if isinstance(params, ExponentialParams):
        return np.where(arr > 0, -np.expm1(-params.rate * np.maximum(arr, 0.0)), 0.0)
    return np.asarray(gev_cdf(arr, params))


def _gev_nll_standard(zeta: float, mu: float, sigma: float, x: np.ndarray) -> float:
    """Negative GEV log-likelihood, or +inf outside the support."""
    if sigma <= 0:
        return math.inf
    t = 1.0 + zeta * (x - mu) / sigma
    if np.any(t <= 0):
        return math.inf
    log_t = np.log(t)
    return float(x.size * math.log(sigma) + (1.0 + 1.0 / zeta) * log_t.sum() + np.exp(-log_t / zeta).sum())


def log_likelihood(params: Params, values: CleanSample | Sequence[float]) -> float:
    x = _as_array(values)
    if isinstance(params, NormalParams):
        z = (x - params.mu) / params.sigma
        return float(-0.5 * x.size * math.log(2 * math.pi * params.sigma ** 2) - 0.5 * np.dot(z, z))
    if isinstance(params, ExponentialParams):
        if np.any(x < 0):
            return -math.inf
        return float(x.size * math.log(params.rate) - params.rate * x.sum())
    return -_gev_nll_standard(params.zeta, params.mu, params.sigma, x)


def model_mass(params: Params, edges: Sequence[float], eps: float = KL_EPS) -> np.ndarray:
    """Model probability of each histogram bin, conditioned on the binned range and smoothed."""
    c = cdf(params, np.asarray(edges, dtype=float))
    q = np.clip(np.diff(c), 0.0, None)
    total = q.sum()
    if not total > 0:
        raise FitFailedError("fitted model puts no probability on the sample range")
    q = q / total
    return (q + eps) / (1.0 + q.size * eps)


def _finish(family: Family, params: Params, data: np.ndarray, n_bins: int, ll: float | None = None) -> DistFit:
    hist = build_histogram(data, n_bins)
    kl = kl_divergence(hist, model_mass(params, hist.edges))
    if ll is None:
        ll = log_likelihood(params, data)
    return DistFit(family, params, ll, kl)


def _check_spread(data: np.ndarray) -> None:
    if data.size < 2 or data.min() == data.max():
        raise DegenerateSampleError("sample needs at least two distinct values")


# --- fits -------------------------------------------------------------------

def fit_normal(values: CleanSample | Sequence[float], n_bins: int = DEFAULT_BINS) -> DistFit:
    """Maximum-likelihood Normal fit (sigma divides by n)."""
    data = _as_array(values)
    _check_spread(data)
    mu = math.fsum(data.tolist()) / data.size
    sigma = math.sqrt(math.fsum(((data - mu) ** 2).tolist()) / data.size)
    return _finish(Family.NORMAL, NormalParams(mu, sigma), data, n_bins)


def fit_exponential(values: CleanSample | Sequence[float], n_bins: int = DEFAULT_BINS) -> DistFit:
    """Maximum-likelihood Exponential fit on [0, inf): rate = 1 / mean."""
    data = _as_array(values)
    if data.size == 0:
        raise InsufficientDataError("empty sample")
    if np.any(data < 0):
        raise InvalidInputError("exponential fit needs nonnegative values")
    mean = math.fsum(data.tolist()) / data.size
    if not mean > 0:
        raise InvalidInputError("exponential fit needs a positive mean")
    params = ExponentialParams(1.0 / mean)
    if data.min() == data.max():
        # rate is still defined; no histogram can be formed
        return DistFit(Family.EXPONENTIAL, params, log_likelihood(params, data), None)
    return _finish(Family.EXPONENTIAL, params, data, n_bins)


def gev_initial_guess(data: np.ndarray) -> tuple[float, float, float]:
    """Gumbel moment matching: (zeta0, mu0, sigma0)."""
    std = float(np.std(data))
    sigma0 = math.sqrt(6.0) * std / math.pi
    mu0 = float(np.mean(data)) - EULER_GAMMA * sigma0
    return 0.1, mu0, sigma0


def fit_gev(values: CleanSample | Sequence[float], n_bins: int = DEFAULT_BINS) -> DistFit:
    """Maximum-likelihood GEV fit by Nelder-Mead simplex search.

    The search runs on standardized data; infeasible points (outside the
    support) get an infinite penalty. Several shape starts are tried and
    the best feasible optimum wins.
    """
    data = _as_array(values)
    if data.size < GEV_MIN_SAMPLES:
        raise InsufficientDataError(f"GEV fit needs at least {GEV_MIN_SAMPLES} values, got {data.size}")
    _check_spread(data)
    center, scale = float(np.mean(data)), float(np.std(data))
    z = (data - center) / scale

    def objective(theta: np.ndarray) -> float:
        zeta, mu, sigma = theta
        if abs(zeta) < GEV_ZETA_FLOOR:
            zeta = math.copysign(GEV_ZETA_FLOOR, zeta) if zeta != 0 else GEV_ZETA_FLOOR
        return _gev_nll_standard(zeta, mu, sigma, z)

    zeta0, mu0, sigma0 = gev_initial_guess(z)
    best: np.ndarray | None = None
    best_nll = math.inf
    for start_zeta in (zeta0, -zeta0, 0.3):
        x0 = np.array([start_zeta, mu0, sigma0])
        for _ in range(2):  # restart from the optimum to refresh a collapsed simplex
            with np.errstate(invalid="ignore"):  # inf - inf in the simplex convergence test
                res = optimize.minimize(
                    objective, x0, method="Nelder-Mead",
                    options={"xatol": 1e-9, "fatol": 1e-11, "maxiter": 6000, "maxfev": 12000},
                )
            if not math.isfinite(res.fun):
                break
            x0 = res.x
            if res.fun < best_nll:
                best, best_nll = res.x.copy(), float(res.fun)
    if best is None:
        raise FitFailedError("GEV search found no point inside the support")

    zeta, mu, sigma = (float(v) for v in best)
    if abs(zeta) < GEV_ZETA_FLOOR:
        zeta = math.copysign(GEV_ZETA_FLOOR, zeta) if zeta != 0 else GEV_ZETA_FLOOR
    params = GevParams(zeta, center + scale * mu, scale * sigma)
    if np.any(_gev_t(data, params) <= 0):
        raise FitFailedError("GEV optimum violates the support constraint after rescaling")
    ll = -best_nll - data.size * math.log(scale)
    return _finish(Family.GEV, params, data, n_bins, ll)


_FITTERS = {Family.NORMAL: fit_normal, Family.EXPONENTIAL: fit_exponential, Family.GEV: fit_gev}


def fit_family(family: Family, values: CleanSample | Sequence[float], n_bins: int = DEFAULT_BINS) -> DistFit:
    return _FITTERS[family](values, n_bins)


def best_fit(
    values: CleanSample | Sequence[float],
    families: Iterable[Family] | None = None,
    n_bins: int = DEFAULT_BINS,
    failures: list[tuple[Family, str]] | None = None,
) -> list[DistFit]:
    """Fit every applicable family and rank by KL divergence, then log-likelihood.

    Families that fail are left out of the ranking; the reason is logged
    and appended to ``failures`` when given.
    """
    data = _as_array(values)
    chosen = list(Family) if families is None else [f for f in Family if f in set(families)]
    if np.any(data < 0) and Family.EXPONENTIAL in chosen:
        chosen.remove(Family.EXPONENTIAL)
    if not chosen:
        raise InvalidInputError("no applicable distribution family")
    fits: list[DistFit] = []
    for family in chosen:
        try:
            fit = fit_family(family, data, n_bins)
        except (FitFailedError, InsufficientDataError, InvalidInputError) as exc:
            log.warning("%s fit omitted: %s", family.value, exc)
            if failures is not None:
                failures.append((family, str(exc)))
            continue
        if fit.kl_to_empirical is None:
            continue
        fits.append(fit)
    if not fits:
        raise FitFailedError("no family could be fitted")
    return sorted(fits, key=lambda f: (f.kl_to_empirical, -(f.log_likelihood or -math.inf)))
