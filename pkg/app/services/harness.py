"""Replicated simulation experiments for the sample-autocovariance central limit theorems."""
from __future__ import annotations

import logging
import math
import re
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from numpy.typing import NDArray
from scipy import stats

from . import asymptotics
from .discrete_ma import (
    MaModel,
    ma_acvf,
    ma_bartlett_acf_cov,
    ma_bartlett_acvf_cov,
    ma_cross_cov_limit_var,
    ma_limit_covariance_vec,
    ma_simulate,
)
from .errors import ConfigError, DimensionError, InsufficientDataError, ReplicationError, ToolkitError
from .estimators import LagSet, sample_acf, sample_acvf, sample_cross_cov
from .mcarma import DEFAULT_MAX_BURN_IN_STEPS, McarmaModel, SamplePath, acvf, simulate
from .streams import RandomStream, validate_seed

logger = logging.getLogger(__name__)

Model = Union[McarmaModel, MaModel]

MIN_REPLICATIONS = 200
NORMALITY_Z_MAX = 4.0
RATE_SLOPE_RANGE = (-0.6, -0.4)

_CROSS = re.compile(r"^cross\((\d+),\s*(\d+)\)$")


@dataclass(frozen=True)
class Statistic:
    kind: str
    i: int = 1
    j: int = 1

    @classmethod
    def parse(cls, text: str) -> "Statistic":
        text = text.strip()
        if text in ("acvf", "acf"):
            return cls(text)
        match = _CROSS.match(text)
        if match:
            return cls("cross", int(match.group(1)), int(match.group(2)))
        raise ValueError(f"unknown statistic '{text}'; expected acvf, acf or cross(i,j)")

    def __str__(self) -> str:
        return f"cross({self.i},{self.j})" if self.kind == "cross" else self.kind


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    """A replicated experiment; ``lags`` are lag values that must lie on every grid of ``schedule``."""

    model: Model
    schedule: Tuple[Tuple[int, float], ...]
    lags: Tuple[float, ...]
    replications: int = 2000
    base_seed: int = 0
    statistic: Statistic = Statistic("acvf")
    band: float = 0.1
    mean_z_max: float = 6.0
    truth_override: Optional[float] = None
    max_burn_in_steps: int = DEFAULT_MAX_BURN_IN_STEPS
    quadrature_tol: float = asymptotics.DEFAULT_TOL

    def __post_init__(self) -> None:
        object.__setattr__(self, "schedule", tuple((int(n), float(delta)) for n, delta in self.schedule))
        object.__setattr__(self, "lags", tuple(sorted({float(h) for h in self.lags})))
        validate_seed(self.base_seed)
        if not self.schedule:
            raise ConfigError("schedule must contain at least one (n, delta) pair", field="experiment.schedule")
        if not self.lags:
            raise ConfigError("at least one lag is required", field="experiment.lags")
        if self.replications < MIN_REPLICATIONS:
            raise InsufficientDataError(
                f"replications={self.replications}: at least {MIN_REPLICATIONS} are required for the diagnostics"
            )
        for n, delta in self.schedule:
            if n < 2 or not delta > 0.0:
                raise ConfigError(f"invalid schedule point ({n}, {delta})", field="experiment.schedule")
            if self.discrete and delta != 1.0:
                raise ConfigError("MA experiments use delta = 1", field="experiment.schedule")
            LagSet.from_lags(self.lags, delta).check(n)
        d = self.model.d
        if self.statistic.kind == "acf":
            if d != 1:
                raise DimensionError("the acf statistic needs a scalar model")
            if self.lags[0] <= 0.0:
                raise ConfigError("autocorrelation lags must be positive", field="experiment.lags")
        if self.statistic.kind == "cross" and not (1 <= self.statistic.i <= d and 1 <= self.statistic.j <= d):
            raise DimensionError(f"cross-covariance components must lie in 1..{d}")

    @property
    def discrete(self) -> bool:
        return isinstance(self.model, MaModel)

    def scale(self, n: int, delta: float) -> float:
        """``√n`` in discrete time, ``√(nΔ)`` otherwise."""
        return math.sqrt(n) if self.discrete else math.sqrt(n * delta)


# --- Coordinates, truth and theory -------------------------------------------------


def coordinate_labels(spec: ExperimentSpec) -> List[str]:
    """``"h"`` for scalar statistics, ``"h/k"`` for vec index ``k`` of a matrix statistic."""
    d = spec.model.d
    if spec.statistic.kind == "acvf" and d > 1:
        return [f"{h:.12g}/{k}" for h in spec.lags for k in range(d * d)]
    return [f"{h:.12g}" for h in spec.lags]


def _truth_at(spec: ExperimentSpec, h: float) -> NDArray[np.float64]:
    model = spec.model
    gamma = ma_acvf(model, int(round(h))) if spec.discrete else acvf(model, h)
    kind = spec.statistic.kind
    if kind == "acvf":
        return gamma.reshape(-1, order="F")
    if kind == "cross":
        return np.array([gamma[spec.statistic.i - 1, spec.statistic.j - 1]])
    gamma0 = ma_acvf(model, 0) if spec.discrete else acvf(model, 0.0)
    return np.array([gamma[0, 0] / gamma0[0, 0]])


def truth_vector(spec: ExperimentSpec) -> NDArray[np.float64]:
    if spec.truth_override is not None:
        return np.full(len(coordinate_labels(spec)), float(spec.truth_override))
    return np.concatenate([_truth_at(spec, h) for h in spec.lags])


def theoretical_covariance(spec: ExperimentSpec) -> NDArray[np.float64]:
    """Limit covariance over all coordinates; entries with no closed form are NaN."""
    model, lags, kind = spec.model, spec.lags, spec.statistic.kind
    tol = spec.quadrature_tol
    size = len(coordinate_labels(spec))
    theory = np.full((size, size), np.nan)

    if kind == "acvf" and model.d == 1:
        for a, s in enumerate(lags):
            for b, t in enumerate(lags[a:], start=a):
                if spec.discrete:
                    value = ma_bartlett_acvf_cov(model, int(round(s)), int(round(t)))
                else:
                    value = asymptotics.bartlett_acvf_cov(model, s, t, tol)
                theory[a, b] = theory[b, a] = value
    elif kind == "acvf":
        width = model.d**2
        for a, h in enumerate(lags):
            if spec.discrete:
                block = ma_limit_covariance_vec(model, int(round(h)))
            else:
                block = asymptotics.limit_covariance_vec(model, h, tol).total
            theory[a * width:(a + 1) * width, a * width:(a + 1) * width] = block
    elif kind == "acf":
        for a, s in enumerate(lags):
            for b, t in enumerate(lags[a:], start=a):
                if spec.discrete:
                    value = ma_bartlett_acf_cov(model, int(round(s)), int(round(t)))
                else:
                    value = asymptotics.bartlett_acf_cov(model, s, t, tol)
                theory[a, b] = theory[b, a] = value
    else:
        i, j = spec.statistic.i, spec.statistic.j
        for a, h in enumerate(lags):
            if spec.discrete:
                theory[a, a] = ma_cross_cov_limit_var(model, i, j, int(round(h)))
            else:
                theory[a, a] = asymptotics.cross_cov_limit_var(model, i, j, h, tol)
    return theory


# --- Replications --------------------------------------------------------------------


def sample_path(
    model: Model,
    n: int,
    delta: float,
    stream: RandomStream,
    *,
    max_burn_in_steps: int = DEFAULT_MAX_BURN_IN_STEPS,
) -> SamplePath:
    """Simulate either model family; MA paths live on the unit grid."""
    if isinstance(model, MaModel):
        return SamplePath(1.0, ma_simulate(model, n, stream), stream.seed, model.model_id)
    return simulate(model, n, delta, stream, max_burn_in_steps=max_burn_in_steps)


def estimate_vector(spec: ExperimentSpec, path: SamplePath) -> NDArray[np.float64]:
    lags = LagSet.from_lags(spec.lags, path.delta)
    kind = spec.statistic.kind
    if kind == "acvf":
        estimate = sample_acvf(path, lags, mean_adjusted=True)
        return np.concatenate([estimate.gamma_hat[h].reshape(-1, order="F") for h in lags.lags])
    if kind == "acf":
        values = sample_acf(path, lags)
    else:
        values = sample_cross_cov(path, spec.statistic.i, spec.statistic.j, lags)
    return np.array([values[h] for h in lags.lags])


def _replicate(spec: ExperimentSpec, replication: int) -> List[NDArray[np.float64]]:
    """Estimates at every schedule point from the stream ``(base_seed, replication)``."""
    try:
        estimates = []
        for n, delta in spec.schedule:
            stream = RandomStream(spec.base_seed, replication)
            path = sample_path(spec.model, n, delta, stream, max_burn_in_steps=spec.max_burn_in_steps)
            estimates.append(estimate_vector(spec, path))
        return estimates
    except ToolkitError as exc:
        raise ReplicationError(str(exc), stream_index=replication) from exc


# --- Diagnostics ---------------------------------------------------------------------


@dataclass(frozen=True)
class NormalityDiagnostic:
    coordinate: int
    skewness: float
    excess_kurtosis: float
    skewness_z: float
    kurtosis_z: float

    @property
    def passed(self) -> bool:
        return abs(self.skewness_z) < NORMALITY_Z_MAX and abs(self.kurtosis_z) < NORMALITY_Z_MAX

    def to_dict(self) -> Dict[str, object]:
        return {
            "coordinate": self.coordinate,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "skewness_z": self.skewness_z,
            "kurtosis_z": self.kurtosis_z,
            "passed": self.passed,
        }


def normality_diagnostics(
    errors: NDArray[np.float64],
    theoretical_variance: Optional[Sequence[float]] = None,
) -> List[NormalityDiagnostic]:
    """Skewness and excess kurtosis per column against their null deviations ``√(6/N)``, ``√(24/N)``.

    Columns are standardized by the theoretical standard deviation when given,
    otherwise by the sample standard deviation.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.ndim == 1:
        errors = errors[:, np.newaxis]
    count = errors.shape[0]
    if count < MIN_REPLICATIONS:
        raise InsufficientDataError(f"normality diagnostics need at least {MIN_REPLICATIONS} rows, got {count}")
    if theoretical_variance is None:
        variance = errors.var(axis=0, ddof=1)
    else:
        variance = np.asarray(theoretical_variance, dtype=float)
    if np.any(~(variance > 0.0)) or np.any(np.ptp(errors, axis=0) == 0.0):
        raise ToolkitError("a coordinate has zero variance; standardized moments are undefined")

    standardized = errors / np.sqrt(variance)
    skewness = stats.skew(standardized, axis=0)
    kurtosis = stats.kurtosis(standardized, axis=0, fisher=True)
    skew_sd, kurt_sd = math.sqrt(6.0 / count), math.sqrt(24.0 / count)
    return [
        NormalityDiagnostic(c, float(skewness[c]), float(kurtosis[c]), float(skewness[c] / skew_sd), float(kurtosis[c] / kurt_sd))
        for c in range(errors.shape[1])
    ]


def _ratio(empirical: NDArray[np.float64], theoretical: NDArray[np.float64]) -> NDArray[np.float64]:
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = empirical / theoretical
    ratio[~np.isfinite(ratio)] = np.nan
    return ratio


# --- Reports ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SchedulePointReport:
    n: int
    delta: float
    empirical: NDArray[np.float64]
    theoretical: NDArray[np.float64]
    ratio: NDArray[np.float64]
    mean_z: NDArray[np.float64]
    normality: List[NormalityDiagnostic]
    median_abs_error: NDArray[np.float64]
    runtime: float = field(default=0.0, compare=False)

    @property
    def diagonal_ratio(self) -> NDArray[np.float64]:
        return np.diag(self.ratio)


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    statistic: str
    labels: List[str]
    base_seed: int
    replications: int
    band: float
    mean_z_max: float
    points: List[SchedulePointReport]
    truth: NDArray[np.float64]

    @property
    def band_ok(self) -> bool:
        ratio = self.points[-1].diagonal_ratio
        return bool(np.all(np.abs(ratio - 1.0) <= self.band))

    @property
    def mean_ok(self) -> bool:
        return bool(np.all(np.abs(self.points[-1].mean_z) <= self.mean_z_max))

    @property
    def normality_ok(self) -> bool:
        return all(item.passed for item in self.points[-1].normality)

    @property
    def passed(self) -> bool:
        return self.band_ok and self.mean_ok and self.normality_ok


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> ExperimentReport:
    """Run ``spec.replications`` replications and compare against the closed-form limits.

    Replication ``r`` uses stream ``(base_seed, r)`` at every schedule point, so
    the report does not depend on ``threads`` or on execution order.
    """
    labels = coordinate_labels(spec)
    truth = truth_vector(spec)
    theory = theoretical_covariance(spec)
    logger.info(
        "experiment %s: %d replications, %d schedule points, %d coordinates",
        spec.statistic, spec.replications, len(spec.schedule), len(labels),
    )

    started = time.perf_counter()
    results = Parallel(n_jobs=threads, backend="loky")(
        delayed(_replicate)(spec, r) for r in range(spec.replications)
    )
    elapsed = time.perf_counter() - started

    points = []
    diagonal = np.diag(theory)
    for index, (n, delta) in enumerate(spec.schedule):
        estimates = np.vstack([result[index] for result in results])
        raw = estimates - truth
        scaled = spec.scale(n, delta) * raw
        empirical = np.atleast_2d(np.cov(scaled, rowvar=False, ddof=1))
        empirical = 0.5 * (empirical + empirical.T)
        with np.errstate(divide="ignore", invalid="ignore"):
            mean_z = scaled.mean(axis=0) / np.sqrt(diagonal / spec.replications)
        normality = normality_diagnostics(scaled, diagonal)
        point = SchedulePointReport(
            n=n,
            delta=delta,
            empirical=empirical,
            theoretical=theory,
            ratio=_ratio(empirical, theory),
            mean_z=mean_z,
            normality=normality,
            median_abs_error=np.median(np.abs(raw), axis=0),
            runtime=elapsed / len(spec.schedule),
        )
        logger.info("schedule point %d (n=%d, delta=%.6g): variance ratios %s", index, n, delta, point.diagonal_ratio)
        points.append(point)

    logger.info("experiment finished in %.2fs", elapsed)
    return ExperimentReport(
        statistic=str(spec.statistic),
        labels=labels,
        base_seed=spec.base_seed,
        replications=spec.replications,
        band=spec.band,
        mean_z_max=spec.mean_z_max,
        points=points,
        truth=truth,
    )


@dataclass(frozen=True, eq=False)
class RateReport:
    horizons: NDArray[np.float64]
    ratios: NDArray[np.float64]
    slopes: NDArray[np.float64]
    last_closest: List[bool]

    @property
    def passed(self) -> bool:
        low, high = RATE_SLOPE_RANGE
        return bool(np.all((self.slopes >= low) & (self.slopes <= high)))

    def to_dict(self) -> Dict[str, object]:
        return {
            "horizons": self.horizons.tolist(),
            "ratios": self.ratios.tolist(),
            "slopes": self.slopes.tolist(),
            "last_closest": self.last_closest,
            "passed": self.passed,
        }


def rate_verification(spec: ExperimentSpec, report: Optional[ExperimentReport] = None, threads: int = 1) -> RateReport:
    """Log-log slope of the median absolute error against ``nΔ`` (``n`` in discrete time)."""
    if len(spec.schedule) < 3:
        raise InsufficientDataError("rate verification needs at least three schedule points")
    horizons = np.array([n if spec.discrete else n * delta for n, delta in spec.schedule], dtype=float)
    if np.any(np.diff(horizons) <= 0.0):
        raise ConfigError("n * delta must increase along the schedule", field="experiment.schedule")
    report = report or run_experiment(spec, threads)

    medians = np.vstack([point.median_abs_error for point in report.points])
    if np.any(medians <= 0.0):
        raise ToolkitError("median absolute error is zero at some schedule point; the slope is undefined")
    x = np.log(horizons)
    slopes = np.array([np.polyfit(x, np.log(medians[:, c]), 1)[0] for c in range(medians.shape[1])])

    ratios = np.vstack([point.diagonal_ratio for point in report.points])
    deviation = np.abs(ratios - 1.0)
    last_closest = [bool(deviation[-1, c] <= np.nanmin(deviation[:-1, c])) for c in range(ratios.shape[1])]
    logger.info("rate slopes %s (expected within %s)", slopes, RATE_SLOPE_RANGE)
    return RateReport(horizons, ratios, slopes, last_closest)
