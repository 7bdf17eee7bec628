"""Driving Lévy processes: samplers and exact moment functionals.

All drivers are mean-compensated (``E L_1 = 0``); compound Poisson drivers carry
the drift ``-rate * E(J) * t``. Three kinds are shipped: Brownian motion,
compound Poisson with Gaussian or two-point jumps, and independent scalar
components built from those two.
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError, MomentUnavailableError, ToolkitError, UnsupportedDecompositionError
from .matrix_core import Matrix, Vector, as_matrix, is_psd, psd_factor
from .streams import RandomStream

logger = logging.getLogger(__name__)

BatchFunction = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def _check_dt(dt: float) -> float:
    dt = float(dt)
    if not dt > 0.0:
        raise ValueError(f"duration must be positive, got {dt}")
    return dt


# --- Jump laws --------------------------------------------------------------


class JumpLaw(ABC):
    """Distribution of a single compound-Poisson jump."""

    dim: int

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        """Return ``size`` jumps stacked as rows."""

    @abstractmethod
    def mean(self) -> Vector: ...

    @abstractmethod
    def second_moment(self) -> Matrix:
        """``E(J J^T)``."""

    @abstractmethod
    def fourth_moment(self) -> Matrix:
        """``E((J ⊗ J)(J ⊗ J)^T)`` as a ``dim² x dim²`` matrix."""

    @abstractmethod
    def describe(self) -> Dict[str, object]: ...


@dataclass(frozen=True, eq=False)
class GaussianJumps(JumpLaw):
    loc: Vector
    cov: Matrix

    def __post_init__(self) -> None:
        cov = as_matrix(self.cov, "jump cov")
        loc = np.asarray(self.loc, dtype=float).reshape(-1)
        if cov.shape != (loc.size, loc.size):
            raise DimensionError("jump mean and covariance dimensions disagree")
        if not is_psd(cov):
            raise ToolkitError("jump covariance must be symmetric positive semidefinite")
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.loc.size

    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        return self.loc + rng.standard_normal((size, self.dim)) @ psd_factor(self.cov).T

    def mean(self) -> Vector:
        return self.loc.copy()

    def second_moment(self) -> Matrix:
        return self.cov + np.outer(self.loc, self.loc)

    def fourth_moment(self) -> Matrix:
        mu, c = self.loc, self.cov
        t = np.einsum
        m4 = t("a,b,c,d->abcd", mu, mu, mu, mu)
        m4 = m4 + t("a,b,cd->abcd", mu, mu, c) + t("a,c,bd->abcd", mu, mu, c) + t("a,d,bc->abcd", mu, mu, c)
        m4 = m4 + t("b,c,ad->abcd", mu, mu, c) + t("b,d,ac->abcd", mu, mu, c) + t("c,d,ab->abcd", mu, mu, c)
        m4 = m4 + t("ab,cd->abcd", c, c) + t("ac,bd->abcd", c, c) + t("ad,bc->abcd", c, c)
        return m4.reshape(self.dim**2, self.dim**2)

    def describe(self) -> Dict[str, object]:
        return {"type": "gaussian", "mean": self.loc.tolist(), "cov": self.cov.tolist()}


@dataclass(frozen=True, eq=False)
class TwoPointJumps(JumpLaw):
    """Jump equal to ``values[0]`` with probability ``probability``, else ``values[1]``."""

    values: Matrix
    probability: float

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float, ndmin=2)
        if values.shape[0] != 2:
            raise DimensionError("two-point jumps need exactly two support points")
        if not 0.0 <= self.probability <= 1.0:
            raise ToolkitError("two-point probability must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def _weights(self) -> Tuple[float, float]:
        return self.probability, 1.0 - self.probability

    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        pick = rng.random(size) < self.probability
        return np.where(pick[:, np.newaxis], self.values[0], self.values[1])

    def mean(self) -> Vector:
        p, q = self._weights
        return p * self.values[0] + q * self.values[1]

    def second_moment(self) -> Matrix:
        p, q = self._weights
        return p * np.outer(self.values[0], self.values[0]) + q * np.outer(self.values[1], self.values[1])

    def fourth_moment(self) -> Matrix:
        total = np.zeros((self.dim**2, self.dim**2))
        for weight, point in zip(self._weights, self.values):
            xx = np.kron(point, point)
            total += weight * np.outer(xx, xx)
        return total

    def describe(self) -> Dict[str, object]:
        return {"type": "two_point", "values": self.values.tolist(), "probability": self.probability}


# --- Drivers ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JumpPath:
    """Jumps of a compound Poisson driver on ``(0, dt]`` and the compensating drift."""

    times: Vector
    jumps: NDArray[np.float64]
    drift: Vector

    @property
    def increment(self) -> Vector:
        return self.jumps.sum(axis=0) + self.drift


@dataclass(frozen=True, eq=False)
class JumpEvents:
    """Jumps over ``steps`` consecutive intervals of length ``dt``.

    ``offsets`` are jump epochs measured from the left end of their interval.
    """

    step: NDArray[np.int64]
    offsets: Vector
    jumps: NDArray[np.float64]


class LevyDriver(ABC):
    """A mean-zero Lévy process with finite fourth moments."""

    dim: int

    @property
    @abstractmethod
    def sigma_L(self) -> Matrix:
        """``E(L_1 L_1^T)``."""

    @property
    @abstractmethod
    def upsilon(self) -> Matrix:
        """``∫ x x^T ⊗ x x^T ν(dx)``."""

    @property
    @abstractmethod
    def gaussian_cov(self) -> Matrix:
        """Covariance of the Brownian part at unit time."""

    @property
    def drift_rate(self) -> Vector:
        """Compensating drift per unit time of the jump part."""
        return np.zeros(self.dim)

    @property
    def has_jumps(self) -> bool:
        return False

    @property
    def independent_components(self) -> bool:
        return False

    @abstractmethod
    def sample_increments(self, dt: float, size: int, stream: RandomStream) -> NDArray[np.float64]:
        """``size`` iid draws of ``L_{t+dt} - L_t`` stacked as rows."""

    def sample_increment(self, dt: float, stream: RandomStream) -> Vector:
        return self.sample_increments(dt, 1, stream)[0]

    def sample_jumps_on_interval(self, dt: float, stream: RandomStream) -> JumpPath:
        raise UnsupportedDecompositionError(f"{type(self).__name__} has no compound Poisson decomposition")

    def jump_events(self, dt: float, steps: int, stream: RandomStream) -> JumpEvents:
        """Jumps of the jump part over ``steps`` consecutive intervals."""
        return JumpEvents(np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros((0, self.dim)))

    @abstractmethod
    def describe(self) -> Dict[str, object]: ...


@dataclass(frozen=True, eq=False)
class BrownianMotion(LevyDriver):
    sigma: Matrix

    def __post_init__(self) -> None:
        sigma = as_matrix(self.sigma, "sigma")
        if sigma.shape[0] != sigma.shape[1]:
            raise DimensionError("Brownian covariance must be square")
        if not is_psd(sigma):
            raise ToolkitError("Brownian covariance must be symmetric positive semidefinite")
        if not np.any(sigma):
            raise ToolkitError("Brownian covariance is zero; the driver is degenerate")
        object.__setattr__(self, "sigma", 0.5 * (sigma + sigma.T))

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    @property
    def sigma_L(self) -> Matrix:
        return self.sigma.copy()

    @property
    def gaussian_cov(self) -> Matrix:
        return self.sigma.copy()

    @property
    def upsilon(self) -> Matrix:
        return np.zeros((self.dim**2, self.dim**2))

    def sample_increments(self, dt: float, size: int, stream: RandomStream) -> NDArray[np.float64]:
        dt = _check_dt(dt)
        factor = psd_factor(self.sigma) * np.sqrt(dt)
        return stream.rng.standard_normal((size, self.dim)) @ factor.T

    def describe(self) -> Dict[str, object]:
        return {"type": "brownian", "sigma": self.sigma.tolist()}


@dataclass(frozen=True, eq=False)
class CompoundPoisson(LevyDriver):
    rate: float
    jumps: JumpLaw

    def __post_init__(self) -> None:
        if self.rate < 0.0 or not np.isfinite(self.rate):
            raise ToolkitError(f"jump rate must be a finite non-negative number, got {self.rate}")

    @property
    def dim(self) -> int:
        return self.jumps.dim

    @property
    def sigma_L(self) -> Matrix:
        return self.rate * self.jumps.second_moment()

    @property
    def gaussian_cov(self) -> Matrix:
        return np.zeros((self.dim, self.dim))

    @property
    def upsilon(self) -> Matrix:
        return self.rate * self.jumps.fourth_moment()

    @property
    def drift_rate(self) -> Vector:
        return -self.rate * self.jumps.mean()

    @property
    def has_jumps(self) -> bool:
        return self.rate > 0.0

    def sample_increments(self, dt: float, size: int, stream: RandomStream) -> NDArray[np.float64]:
        dt = _check_dt(dt)
        rng = stream.rng
        counts = rng.poisson(self.rate * dt, size)
        draws = self.jumps.sample(rng, int(counts.sum()))
        totals = np.zeros((size, self.dim))
        np.add.at(totals, np.repeat(np.arange(size), counts), draws)
        return totals + self.drift_rate * dt

    def sample_jumps_on_interval(self, dt: float, stream: RandomStream) -> JumpPath:
        dt = _check_dt(dt)
        rng = stream.rng
        count = int(rng.poisson(self.rate * dt))
        times = np.sort(dt * (1.0 - rng.random(count)))
        return JumpPath(times=times, jumps=self.jumps.sample(rng, count), drift=self.drift_rate * dt)

    def jump_events(self, dt: float, steps: int, stream: RandomStream) -> JumpEvents:
        dt = _check_dt(dt)
        rng = stream.rng
        counts = rng.poisson(self.rate * dt, steps)
        total = int(counts.sum())
        offsets = dt * (1.0 - rng.random(total))
        return JumpEvents(np.repeat(np.arange(steps), counts), offsets, self.jumps.sample(rng, total))

    def describe(self) -> Dict[str, object]:
        return {"type": "compound_poisson", "rate": self.rate, "jumps": self.jumps.describe()}


@dataclass(frozen=True, eq=False)
class IndependentComponents(LevyDriver):
    """Independent scalar drivers stacked into one vector driver."""

    components: Tuple[LevyDriver, ...]

    def __post_init__(self) -> None:
        components = tuple(self.components)
        if not components:
            raise DimensionError("independent-component driver needs at least one component")
        for component in components:
            if component.dim != 1 or isinstance(component, IndependentComponents):
                raise DimensionError("independent components must be scalar Brownian or compound Poisson drivers")
        object.__setattr__(self, "components", components)

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def independent_components(self) -> bool:
        return True

    def _diagonal(self, values: List[float]) -> Matrix:
        return np.diag(np.asarray(values, dtype=float))

    @property
    def sigma_L(self) -> Matrix:
        return self._diagonal([c.sigma_L[0, 0] for c in self.components])

    @property
    def gaussian_cov(self) -> Matrix:
        return self._diagonal([c.gaussian_cov[0, 0] for c in self.components])

    @property
    def thetas(self) -> Vector:
        """Per-component fourth cumulants ``∫ x^4 ν_i(dx)``."""
        return np.array([c.upsilon[0, 0] for c in self.components])

    @property
    def upsilon(self) -> Matrix:
        m = self.dim
        result = np.zeros((m * m, m * m))
        for i, theta in enumerate(self.thetas):
            result[i * m + i, i * m + i] = theta
        return result

    @property
    def drift_rate(self) -> Vector:
        return np.array([c.drift_rate[0] for c in self.components])

    @property
    def has_jumps(self) -> bool:
        return any(c.has_jumps for c in self.components)

    def sample_increments(self, dt: float, size: int, stream: RandomStream) -> NDArray[np.float64]:
        return np.hstack([c.sample_increments(dt, size, stream) for c in self.components])

    def sample_jumps_on_interval(self, dt: float, stream: RandomStream) -> JumpPath:
        if not all(isinstance(c, CompoundPoisson) for c in self.components):
            raise UnsupportedDecompositionError("a Brownian component has no compound Poisson decomposition")
        times, jumps = [], []
        for axis, component in enumerate(self.components):
            path = component.sample_jumps_on_interval(dt, stream)
            embedded = np.zeros((path.times.size, self.dim))
            embedded[:, axis] = path.jumps[:, 0]
            times.append(path.times)
            jumps.append(embedded)
        all_times = np.concatenate(times)
        order = np.argsort(all_times, kind="stable")
        return JumpPath(all_times[order], np.vstack(jumps)[order], self.drift_rate * _check_dt(dt))

    def jump_events(self, dt: float, steps: int, stream: RandomStream) -> JumpEvents:
        step, offsets, jumps = [], [], []
        for axis, component in enumerate(self.components):
            events = component.jump_events(dt, steps, stream)
            embedded = np.zeros((events.offsets.size, self.dim))
            embedded[:, axis] = events.jumps[:, 0]
            step.append(events.step)
            offsets.append(events.offsets)
            jumps.append(embedded)
        return JumpEvents(np.concatenate(step), np.concatenate(offsets), np.vstack(jumps))

    def describe(self) -> Dict[str, object]:
        return {"type": "independent", "components": [c.describe() for c in self.components]}


# --- Moment functionals -----------------------------------------------------


def sample_increment(driver: LevyDriver, dt: float, stream: RandomStream) -> Vector:
    """One draw of ``L_{t+dt} - L_t``."""
    return driver.sample_increment(dt, stream)


def sample_jumps_on_interval(driver: LevyDriver, dt: float, stream: RandomStream) -> JumpPath:
    return driver.sample_jumps_on_interval(dt, stream)


def upsilon_of(driver: LevyDriver) -> Matrix:
    """Exact ``Υ = ∫ x x^T ⊗ x x^T ν(dx)``; zero for Brownian motion."""
    return driver.upsilon


def gaussian_covariance(driver: LevyDriver) -> Matrix:
    return driver.gaussian_cov


def theta(driver: LevyDriver) -> float:
    """Fourth cumulant ``∫ x⁴ ν(dx)`` of a scalar driver."""
    if driver.dim != 1:
        raise DimensionError("theta is defined for scalar drivers only")
    return float(driver.upsilon[0, 0])


def fourth_abs_moment(driver: LevyDriver) -> float:
    """``E ||L_1||^4`` from the cumulant decomposition of a mean-zero Lévy process."""
    m = driver.dim
    sigma = driver.sigma_L
    ups = driver.upsilon
    diagonal = [i * m + i for i in range(m)]
    fourth_cumulant = float(ups[np.ix_(diagonal, diagonal)].sum())
    return fourth_cumulant + float(np.trace(sigma)) ** 2 + 2.0 * float(np.trace(sigma @ sigma))


def kurtosis_coefficient(driver: LevyDriver) -> float:
    """``θ / (E L_1²)²`` for a scalar driver, with ``θ = ∫ x⁴ ν(dx) = E L_1⁴ - 3 (E L_1²)²``."""
    if driver.dim != 1:
        raise DimensionError("kurtosis coefficient is defined for scalar drivers only")
    variance = float(driver.sigma_L[0, 0])
    return theta(driver) / variance**2


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """The map ``x -> w^T (x ⊗ x)`` evaluated on a batch of rows."""

    weights: Vector

    def __call__(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        x = np.atleast_2d(x)
        outer = np.einsum("ka,kb->kab", x, x).reshape(x.shape[0], -1)
        return outer @ self.weights


@dataclass(frozen=True, eq=False)
class NuFunctional:
    value: float
    stderr: float
    exact: bool


def nu_quadratic_functional(
    driver: LevyDriver,
    g: BatchFunction,
    h: BatchFunction,
    mc_budget: int = 1_000_000,
    stream: Optional[RandomStream] = None,
) -> NuFunctional:
    """Evaluate ``∫ g(x) h(x) ν(dx)``.

    ``g`` and ``h`` map an ``(N, m)`` batch of jumps to ``(N,)`` values. Pairs of
    :class:`QuadraticForm` are evaluated exactly as ``w_g^T Υ w_h``; otherwise
    compound Poisson parts are integrated by Monte Carlo over ``mc_budget``
    jump draws and the standard error is reported.
    """
    if isinstance(driver, BrownianMotion):
        return NuFunctional(0.0, 0.0, True)
    if isinstance(g, QuadraticForm) and isinstance(h, QuadraticForm):
        return NuFunctional(float(g.weights @ driver.upsilon @ h.weights), 0.0, True)
    if mc_budget <= 0:
        raise MomentUnavailableError("no closed form registered and Monte-Carlo budget is zero")
    stream = stream or RandomStream(0)

    if isinstance(driver, CompoundPoisson):
        parts = [(driver, np.eye(driver.dim))]
    elif isinstance(driver, IndependentComponents):
        parts = [(c, np.eye(driver.dim)[[axis]]) for axis, c in enumerate(driver.components)
                 if isinstance(c, CompoundPoisson)]
    else:
        raise MomentUnavailableError(f"no ν-functional available for {type(driver).__name__}")

    value, variance = 0.0, 0.0
    for component, embedding in parts:
        draws = component.jumps.sample(stream.rng, mc_budget) @ embedding
        products = np.asarray(g(draws), dtype=float) * np.asarray(h(draws), dtype=float)
        value += component.rate * float(products.mean())
        variance += component.rate**2 * float(products.var(ddof=1)) / mc_budget
    return NuFunctional(value, float(np.sqrt(variance)), False)
