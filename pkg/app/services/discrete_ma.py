"""Discrete-time multivariate MA(∞) processes, truncated to finitely many coefficients.

``Y_k = Σ_j C_j ξ_{k-j}`` with iid noise ``ξ``. Used as the classical benchmark
for the continuous-time machinery: the same vec-form limit covariance with
sums in place of integrals.
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionError, ToolkitError, UnstableSpectrumError
from .matrix_core import Matrix, as_matrix, is_psd, kron, kron_permutation, psd_factor
from .mcarma import model_checksum
from .streams import RandomStream

logger = logging.getLogger(__name__)

DEFAULT_NOISE_MC_DRAWS = 1_000_000


# --- Noise laws -------------------------------------------------------------


class NoiseLaw(ABC):
    """Mean-zero iid noise with finite fourth moments."""

    dim: int

    @property
    @abstractmethod
    def cov(self) -> Matrix:
        """``Σ_ξ = E(ξ ξ^T)``."""

    @property
    @abstractmethod
    def upsilon_star(self) -> Matrix:
        """``E((ξ⊗ξ)(ξ⊗ξ)^T) - E(ξ⊗ξ) E(ξ⊗ξ)^T``."""

    @property
    def upsilon_stderr(self) -> float:
        return 0.0

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]: ...

    @abstractmethod
    def describe(self) -> Dict[str, object]: ...


@dataclass(frozen=True, eq=False)
class GaussianNoise(NoiseLaw):
    sigma: Matrix

    def __post_init__(self) -> None:
        sigma = as_matrix(self.sigma, "noise cov")
        if sigma.shape[0] != sigma.shape[1] or not is_psd(sigma):
            raise ToolkitError("noise covariance must be square symmetric positive semidefinite")
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    @property
    def cov(self) -> Matrix:
        return self.sigma.copy()

    @property
    def upsilon_star(self) -> Matrix:
        s = np.kron(self.sigma, self.sigma)
        return s + s @ kron_permutation(self.dim)

    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        return rng.standard_normal((size, self.dim)) @ psd_factor(self.sigma).T

    def describe(self) -> Dict[str, object]:
        return {"type": "gaussian", "cov": self.sigma.tolist()}


@dataclass(frozen=True, eq=False)
class TwoPointNoise(NoiseLaw):
    """``ξ = values[0]`` with probability ``probability``, else ``values[1]``; must be centred."""

    values: Matrix
    probability: float

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float, ndmin=2)
        if values.shape[0] != 2:
            raise DimensionError("two-point noise needs exactly two support points")
        if not 0.0 < self.probability < 1.0:
            raise ToolkitError("two-point probability must lie in (0, 1)")
        object.__setattr__(self, "values", values)
        if not np.allclose(self._mean(), 0.0, atol=1e-12):
            raise ToolkitError("two-point noise must have mean zero")

    def _mean(self) -> NDArray[np.float64]:
        return self.probability * self.values[0] + (1.0 - self.probability) * self.values[1]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def cov(self) -> Matrix:
        p = self.probability
        return p * np.outer(self.values[0], self.values[0]) + (1 - p) * np.outer(self.values[1], self.values[1])

    @property
    def upsilon_star(self) -> Matrix:
        p = self.probability
        total = np.zeros((self.dim**2, self.dim**2))
        for weight, point in ((p, self.values[0]), (1 - p, self.values[1])):
            xx = np.kron(point, point)
            total += weight * np.outer(xx, xx)
        vec_cov = self.cov.reshape(-1, order="F")
        return total - np.outer(vec_cov, vec_cov)

    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        pick = rng.random(size) < self.probability
        return np.where(pick[:, np.newaxis], self.values[0], self.values[1])

    def describe(self) -> Dict[str, object]:
        return {"type": "two_point", "values": self.values.tolist(), "probability": self.probability}


@dataclass(frozen=True, eq=False)
class StudentTNoise(NoiseLaw):
    """Independent Student-t components with ``df > 4`` scaled to standard deviations ``scale``.

    ``Υ*`` is estimated from ``mc_draws`` draws of the fixed stream ``(seed, 0)``.
    """

    df: float
    scale: NDArray[np.float64]
    mc_draws: int = DEFAULT_NOISE_MC_DRAWS
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.df > 4.0:
            raise ToolkitError("Student-t noise needs df > 4 for finite fourth moments")
        scale = np.atleast_1d(np.asarray(self.scale, dtype=float))
        if scale.ndim != 1 or np.any(scale <= 0.0):
            raise ToolkitError("Student-t scales must be a vector of positive numbers")
        if self.mc_draws < 2:
            raise ToolkitError("Student-t noise needs at least two Monte-Carlo draws")
        object.__setattr__(self, "scale", scale)

    @property
    def dim(self) -> int:
        return self.scale.size

    @property
    def cov(self) -> Matrix:
        return np.diag(self.scale**2)

    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        unit = np.sqrt((self.df - 2.0) / self.df)
        return rng.standard_t(self.df, (size, self.dim)) * unit * self.scale

    @cached_property
    def _fourth_moment_estimate(self) -> Tuple[Matrix, float]:
        draws = self.sample(RandomStream(self.seed).rng, self.mc_draws)
        outer = np.einsum("ka,kb->kab", draws, draws).reshape(self.mc_draws, -1)
        centred = outer - outer.mean(axis=0)
        estimate = centred.T @ centred / self.mc_draws
        width = centred.shape[1]
        spread = max(
            float(np.std(centred[:, a] * centred[:, b], ddof=1)) for a in range(width) for b in range(a, width)
        )
        stderr = spread / np.sqrt(self.mc_draws)
        logger.debug("Student-t Υ* estimated from %d draws, stderr %.3e", self.mc_draws, stderr)
        return 0.5 * (estimate + estimate.T), stderr

    @property
    def upsilon_star(self) -> Matrix:
        return self._fourth_moment_estimate[0].copy()

    @property
    def upsilon_stderr(self) -> float:
        return self._fourth_moment_estimate[1]

    def describe(self) -> Dict[str, object]:
        return {"type": "student_t", "df": self.df, "scale": self.scale.tolist()}


# --- Model --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MaModel:
    """Coefficients ``C_0..C_J`` (``m x m``) and noise; ``C_j = 0`` outside that range."""

    coeffs: Tuple[Matrix, ...]
    noise: NoiseLaw
    tail: float = 0.0

    def __post_init__(self) -> None:
        if not self.coeffs:
            raise DimensionError("an MA model needs at least one coefficient")
        coeffs = tuple(as_matrix(c, f"C[{j}]") for j, c in enumerate(self.coeffs))
        m = self.noise.dim
        for j, c in enumerate(coeffs):
            if c.shape != (m, m):
                raise DimensionError(f"C[{j}] must be {m}x{m}, got {c.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def m(self) -> int:
        return self.noise.dim

    @property
    def d(self) -> int:
        return self.noise.dim

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_scalar(self) -> bool:
        return self.m == 1

    def coefficient(self, j: int) -> Matrix:
        if 0 <= j <= self.order:
            return self.coeffs[j]
        return np.zeros((self.m, self.m))

    def describe(self) -> Dict[str, object]:
        return {
            "type": "ma",
            "coeffs": [c.tolist() for c in self.coeffs],
            "noise": self.noise.describe(),
        }

    @cached_property
    def model_id(self) -> str:
        return model_checksum(self.describe())


def materialize_varma(
    ar: Sequence[ArrayLike],
    ma: Sequence[ArrayLike],
    noise: NoiseLaw,
    truncation: int,
) -> MaModel:
    """ψ-weights of ``Y_k = Σ Φ_i Y_{k-i} + Σ Θ_j ξ_{k-j}`` truncated at ``J = truncation``.

    The dropped tail ``Σ_{j>J} ||ψ_j||`` is estimated from the next ``10 (J + 1)``
    weights and stored on the model.
    """
    m = noise.dim
    if truncation < 0:
        raise ValueError("truncation must be non-negative")
    phi = [as_matrix(a, f"ar[{i}]") for i, a in enumerate(ar)]
    theta = [as_matrix(b, f"ma[{j}]") for j, b in enumerate(ma)] or [np.eye(m)]
    for block in phi + theta:
        if block.shape != (m, m):
            raise DimensionError(f"VARMA coefficients must be {m}x{m}, got {block.shape}")
    if phi:
        companion = np.zeros((len(phi) * m, len(phi) * m))
        companion[:m, :] = np.hstack(phi)
        companion[m:, :-m] = np.eye((len(phi) - 1) * m)
        radius = float(np.max(np.abs(np.linalg.eigvals(companion))))
        if radius >= 1.0:
            raise UnstableSpectrumError(f"VARMA autoregression is not causal: spectral radius {radius:.6g} >= 1")

    horizon = truncation + 10 * (truncation + 1)
    psi = []
    for j in range(horizon + 1):
        weight = theta[j].copy() if j < len(theta) else np.zeros((m, m))
        for i in range(1, min(j, len(phi)) + 1):
            weight += phi[i - 1] @ psi[j - i]
        psi.append(weight)
    tail = float(sum(np.linalg.norm(w, 2) for w in psi[truncation + 1:]))
    if tail > 1e-8:
        logger.warning("MA truncation at J=%d drops a coefficient tail of %.3e", truncation, tail)
    return MaModel(tuple(psi[: truncation + 1]), noise, tail)


# --- Moments and simulation ----------------------------------------------------


def ma_acvf(model: MaModel, h: int) -> Matrix:
    """``Γ(h) = Σ_j C_j Σ_ξ C_{j+h}^T``."""
    h = _check_lag(h)
    sigma = model.noise.cov
    total = np.zeros((model.m, model.m))
    for j in range(model.order - h + 1):
        total += model.coeffs[j] @ sigma @ model.coeffs[j + h].T
    return total


def ma_simulate(model: MaModel, n: int, stream: RandomStream) -> NDArray[np.float64]:
    """``n x m`` observations from noise ``ξ_{1-J}, ..., ξ_n``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    order = model.order
    noise = model.noise.sample(stream.rng, n + order)
    observations = np.zeros((n, model.m))
    for j, c in enumerate(model.coeffs):
        observations += noise[order - j: order - j + n] @ c.T
    return observations


def _check_lag(h: int) -> int:
    if int(h) != h or h < 0:
        raise ValueError(f"discrete lags must be non-negative integers, got {h}")
    return int(h)


def sigma_r(model: MaModel, r: int) -> Matrix:
    """``Σ_r = Σ_j C_{j+r} ⊗ C_j``; ``Σ_{-r}`` equals ``Σ*_r = Σ_j C_j ⊗ C_{j+r}``."""
    m = model.m
    total = np.zeros((m * m, m * m))
    for j in range(max(0, -r), model.order + 1):
        if j + r > model.order:
            break
        total += kron(model.coeffs[j + r], model.coeffs[j])
    return total


def sigma_r_star(model: MaModel, r: int) -> Matrix:
    return sigma_r(model, -r)


def ma_limit_parts(model: MaModel, h: int) -> Tuple[Matrix, Matrix]:
    """Return the ``Υ*`` term and the Gaussian term of the vec-form limit covariance."""
    h = _check_lag(h)
    m = model.m
    sigma = model.noise.cov
    s = np.kron(sigma, sigma)
    r_matrix = kron_permutation(m) @ s
    lead = sigma_r(model, h)
    fourth = lead @ model.noise.upsilon_star @ lead.T

    gaussian = np.zeros((m * m, m * m))
    for r in range(1, model.order + h + 1):
        forward = sigma_r(model, r + h)
        backward = sigma_r_star(model, r - h)
        cross = forward @ r_matrix @ backward.T
        gaussian += forward @ s @ forward.T + backward @ s @ backward.T + cross + cross.T
    return fourth, 0.5 * (gaussian + gaussian.T)


def ma_limit_covariance_vec(model: MaModel, h: int) -> Matrix:
    """Asymptotic covariance of ``√n vec(Γ̂_n(h) - Γ(h))`` (``m² x m²``)."""
    fourth, gaussian = ma_limit_parts(model, h)
    total = fourth + gaussian
    return 0.5 * (total + total.T)


def _require_scalar(model: MaModel) -> None:
    if not model.is_scalar:
        raise DimensionError("this formula is defined for scalar MA models only")


def _gamma_table(model: MaModel, span: int) -> Dict[int, float]:
    values = {k: float(ma_acvf(model, k)[0, 0]) for k in range(model.order + 1)}
    return {k: values.get(abs(k), 0.0) for k in range(-span, span + 1)}


def ma_fourth_cumulant_ratio(model: MaModel) -> float:
    """``(E ξ⁴ - 3 σ⁴) / σ⁴`` of scalar noise."""
    _require_scalar(model)
    variance = float(model.noise.cov[0, 0])
    return (float(model.noise.upsilon_star[0, 0]) - 2.0 * variance**2) / variance**2


def ma_bartlett_acvf_cov(model: MaModel, s: int, t: int) -> float:
    """Bartlett ``m_{s,t}`` with sums over integer ``u``."""
    _require_scalar(model)
    s, t = _check_lag(s), _check_lag(t)
    span = model.order + max(s, t)
    gamma = _gamma_table(model, 2 * span)
    g = lambda k: gamma.get(k, 0.0)  # noqa: E731
    series = sum(g(u + s) * g(u + t) + g(u + s) * g(u - t) for u in range(-span, span + 1))
    return ma_fourth_cumulant_ratio(model) * g(s) * g(t) + series


def ma_bartlett_acf_cov(model: MaModel, s: int, t: int) -> float:
    """Bartlett ``v_{s,t}`` for sample autocorrelations at lags ``s, t >= 1``."""
    _require_scalar(model)
    s, t = _check_lag(s), _check_lag(t)
    if s == 0 or t == 0:
        raise ValueError("autocorrelation lags must be positive")
    span = model.order + max(s, t)
    gamma = _gamma_table(model, 2 * span)
    g0 = gamma[0]
    rho = lambda k: gamma.get(k, 0.0) / g0  # noqa: E731
    total = 0.0
    for u in range(-span, span + 1):
        total += (
            rho(u + s) * rho(u + t)
            + rho(u - s) * rho(u + t)
            + 2.0 * rho(s) * rho(t) * rho(u) ** 2
            - 2.0 * rho(s) * rho(u) * rho(u + t)
            - 2.0 * rho(t) * rho(u) * rho(u + s)
        )
    return total


def ma_cross_cov_limit_var(model: MaModel, i: int, j: int, h: int) -> float:
    """Limit variance of ``√n γ̂^{(ij)}_n(h)``; components are 1-based."""
    m = model.m
    if not (1 <= i <= m and 1 <= j <= m):
        raise DimensionError(f"components must lie in 1..{m}, got ({i}, {j})")
    index = (j - 1) * m + (i - 1)
    return float(ma_limit_covariance_vec(model, h)[index, index])
