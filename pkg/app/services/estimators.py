"""Sample statistics on equally spaced observations."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, Tuple

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError, LagTooLargeError, OffGridLagError, ToolkitError
from .matrix_core import Matrix, Vector
from .mcarma import SamplePath

logger = logging.getLogger(__name__)

_GRID_TOL = 1e-9


def snap_lag(h: float, delta: float) -> float:
    """Largest grid lag not exceeding ``h``. Never applied implicitly."""
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    return math.floor(h / delta + _GRID_TOL) * delta


def grid_multiplier(h: float, delta: float) -> int:
    """Return ``h / delta`` when it is a non-negative integer, else raise :class:`OffGridLagError`."""
    if h < 0.0:
        raise OffGridLagError(f"lag {h} is negative")
    ratio = h / delta
    k = round(ratio)
    if abs(ratio - k) > _GRID_TOL * max(1.0, ratio):
        raise OffGridLagError(
            f"lag {h} is not a multiple of the grid step {delta}; "
            f"use snap_lag(h, delta) = {snap_lag(h, delta):.12g} explicitly if that is intended"
        )
    return int(k)


@dataclass(frozen=True)
class LagSet:
    """Sorted, distinct grid lags stored as integer multiples of ``delta``."""

    delta: float
    multipliers: Tuple[int, ...]

    @classmethod
    def from_lags(cls, lags: Iterable[float], delta: float) -> "LagSet":
        if not delta > 0.0:
            raise ValueError("delta must be positive")
        multipliers = sorted({grid_multiplier(float(h), delta) for h in lags})
        if not multipliers:
            raise ValueError("at least one lag is required")
        return cls(float(delta), tuple(multipliers))

    @classmethod
    def from_multipliers(cls, multipliers: Iterable[int], delta: float) -> "LagSet":
        values = sorted({int(k) for k in multipliers})
        if not values or values[0] < 0:
            raise ValueError("lag multipliers must be non-negative and non-empty")
        return cls(float(delta), tuple(values))

    @property
    def lags(self) -> Tuple[float, ...]:
        return tuple(k * self.delta for k in self.multipliers)

    def __iter__(self) -> Iterator[Tuple[int, float]]:
        return iter(zip(self.multipliers, self.lags))

    def __len__(self) -> int:
        return len(self.multipliers)

    def check(self, n: int) -> None:
        if self.multipliers[-1] > n - 1:
            raise LagTooLargeError(
                f"lag {self.lags[-1]:.12g} needs {self.multipliers[-1]} steps but only {n} observations are available"
            )


@dataclass(frozen=True, eq=False)
class AcfEstimate:
    lags: LagSet
    gamma_hat: Dict[float, Matrix]
    n: int
    delta: float
    mean_adjusted: bool

    def gamma(self, h: float) -> Matrix:
        k = grid_multiplier(h, self.delta)
        for multiplier, lag in self.lags:
            if multiplier == k:
                return self.gamma_hat[lag]
        raise KeyError(h)

    def rows(self) -> Iterator[Tuple[float, int, int, float]]:
        """``(lag, i, j, value)`` in lexicographic order, components 1-based."""
        for lag in self.lags.lags:
            matrix = self.gamma_hat[lag]
            for i in range(matrix.shape[0]):
                for j in range(matrix.shape[1]):
                    yield lag, i + 1, j + 1, float(matrix[i, j])


def _observations(path: SamplePath) -> NDArray[np.float64]:
    return np.asarray(path.observations, dtype=float)


def sample_mean(path: SamplePath) -> Vector:
    """Column means accumulated with compensated summation."""
    data = _observations(path)
    return np.array([math.fsum(data[:, i]) for i in range(data.shape[1])]) / data.shape[0]


def _lagged_sum(left: NDArray[np.float64], right: NDArray[np.float64]) -> float:
    return math.fsum(left * right)


def sample_acvf(path: SamplePath, lags: LagSet, mean_adjusted: bool = True) -> AcfEstimate:
    """``Γ̂_n(h) = n^{-1} Σ_{k=1}^{n-h/Δ} (Y_k - Ȳ)(Y_{k+h/Δ} - Ȳ)^T``.

    With ``mean_adjusted=False`` the raw products ``Y_k Y_{k+h/Δ}^T`` are used,
    truncated at the same index so both variants share one window. The divisor is
    ``n`` in both cases.
    """
    if abs(lags.delta - path.delta) > _GRID_TOL * path.delta:
        raise OffGridLagError(f"lag grid step {lags.delta} differs from the path grid step {path.delta}")
    data = _observations(path)
    n, d = data.shape
    lags.check(n)
    if mean_adjusted:
        data = data - sample_mean(path)

    estimates: Dict[float, Matrix] = {}
    for k, lag in lags:
        head = data[: n - k]
        tail = data[k:]
        matrix = np.empty((d, d))
        for i in range(d):
            for j in range(d):
                matrix[i, j] = _lagged_sum(head[:, i], tail[:, j]) / n
        estimates[lag] = matrix
    return AcfEstimate(lags, estimates, n, path.delta, mean_adjusted)


def sample_acf(path: SamplePath, lags: LagSet) -> Dict[float, float]:
    """``ρ̂(h) = γ̂(h) / γ̂(0)`` for scalar data."""
    if path.d != 1:
        raise DimensionError("sample autocorrelation is defined for scalar paths only")
    with_zero = LagSet.from_multipliers(set(lags.multipliers) | {0}, lags.delta)
    estimate = sample_acvf(path, with_zero, mean_adjusted=True)
    variance = float(estimate.gamma_hat[0.0][0, 0])
    if not variance > 0.0:
        raise ToolkitError("sample variance is zero; the autocorrelation is undefined")
    return {lag: float(estimate.gamma_hat[lag][0, 0]) / variance for lag in lags.lags}


def sample_cross_cov(path: SamplePath, i: int, j: int, lags: LagSet) -> Dict[float, float]:
    """``γ̂^{(ij)}(h) = e_i^T Γ̂_n(h) e_j`` with 1-based components."""
    if not (1 <= i <= path.d and 1 <= j <= path.d):
        raise DimensionError(f"components must lie in 1..{path.d}, got ({i}, {j})")
    estimate = sample_acvf(path, lags, mean_adjusted=True)
    return {lag: float(estimate.gamma_hat[lag][i - 1, j - 1]) for lag in lags.lags}
