"""Limit covariances of sample autocovariances and autocorrelations.

Every ``u``-integral over ``[0, ∞)`` is evaluated with the closed-form
exponential representation of ``Σ_Y`` inside :func:`integrate_halfline`:

    Σ_Y(u)  = (E ⊗ E)(e^{Au} ⊗ I) K,   Σ*_Y(u) = (E ⊗ E)(I ⊗ e^{Au}) K,
    K = -(A ⊕ A)^{-1} (B ⊗ B),

for ``u >= 0``; for ``u < 0`` the two swap roles.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg

from .discrete_ma import MaModel, ma_acvf, ma_bartlett_acvf_cov, ma_fourth_cumulant_ratio, ma_limit_parts
from .errors import DimensionError, SingularSystemError
from .levy import BrownianMotion, QuadraticForm, kurtosis_coefficient, nu_quadratic_functional
from .matrix_core import (
    Matrix,
    QuadratureResult,
    expm,
    integrate_halfline,
    integrate_interval,
    kron_permutation,
    kron_sum,
)
from .mcarma import McarmaModel, acvf_batch

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
NU_FLAG_RATIO = 0.01

Lag = Union[float, Tuple[float, float]]


@dataclass(frozen=True, eq=False)
class LimitCovariance:
    """``total = fourth_moment_part + gaussian_part``; scalars are stored as 0-d arrays."""

    lag: Lag
    total: NDArray[np.float64]
    fourth_moment_part: NDArray[np.float64]
    gaussian_part: NDArray[np.float64]
    quadrature_report: Dict[str, object]
    terms: Dict[str, NDArray[np.float64]] = field(default_factory=dict, repr=False)

    def to_dict(self) -> Dict[str, object]:
        lag = list(self.lag) if isinstance(self.lag, tuple) else self.lag
        return {
            "lag": lag,
            "total": np.asarray(self.total).tolist(),
            "fourth_moment_part": np.asarray(self.fourth_moment_part).tolist(),
            "gaussian_part": np.asarray(self.gaussian_part).tolist(),
            "quadrature_report": self.quadrature_report,
        }


def _scalar_limit(lag: Lag, fourth: float, gaussian: float, report: Dict[str, object]) -> LimitCovariance:
    return LimitCovariance(lag, np.asarray(fourth + gaussian), np.asarray(fourth), np.asarray(gaussian), report)


# --- Kronecker forms ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Forms:
    k3: NDArray[np.float64]  # K reshaped to (pd, pd, m²)
    k_norm: float
    e_norm: float
    gamma_bound: float  # ||E||² ||V||


@lru_cache(maxsize=64)
def _forms(model: McarmaModel) -> _Forms:
    a = model.a.a
    try:
        k = linalg.solve(kron_sum(a, a), -np.kron(model.b, model.b))
    except linalg.LinAlgError as exc:
        raise SingularSystemError(f"Kronecker-sum resolvent is singular: {exc}") from exc
    e_norm = float(np.linalg.norm(model.e, 2))
    return _Forms(
        k3=k.reshape(model.pd, model.pd, model.m**2),
        k_norm=float(np.linalg.norm(k, 2)),
        e_norm=e_norm,
        gamma_bound=e_norm**2 * float(np.linalg.norm(model.state_cov, 2)),
    )


def _forward(model: McarmaModel, forms: _Forms, t: NDArray[np.float64]) -> NDArray[np.float64]:
    left = model.e @ expm(model.a.a, t)
    out = np.einsum("kia,jb,abc->kijc", left, model.e, forms.k3)
    return out.reshape(t.size, model.d**2, model.m**2)


def _backward(model: McarmaModel, forms: _Forms, t: NDArray[np.float64]) -> NDArray[np.float64]:
    right = model.e @ expm(model.a.a, t)
    out = np.einsum("ia,kjb,abc->kijc", model.e, right, forms.k3)
    return out.reshape(t.size, model.d**2, model.m**2)


def _batch(model: McarmaModel, u: ArrayLike, star: bool) -> NDArray[np.float64]:
    forms = _forms(model)
    u = np.asarray(u, dtype=float).reshape(-1)
    out = np.empty((u.size, model.d**2, model.m**2))
    positive = u >= 0.0
    direct, swapped = (_backward, _forward) if star else (_forward, _backward)
    if positive.any():
        out[positive] = direct(model, forms, u[positive])
    if (~positive).any():
        out[~positive] = swapped(model, forms, -u[~positive])
    return out


def sigma_y_batch(model: McarmaModel, u: ArrayLike) -> NDArray[np.float64]:
    return _batch(model, u, star=False)


def sigma_y_star_batch(model: McarmaModel, u: ArrayLike) -> NDArray[np.float64]:
    return _batch(model, u, star=True)


def sigma_y(model: McarmaModel, u: float) -> Matrix:
    """``Σ_Y(u) = ∫_0^∞ f(s+u) ⊗ f(s) ds`` (``d² x m²``)."""
    return sigma_y_batch(model, [u])[0]


def sigma_y_star(model: McarmaModel, u: float) -> Matrix:
    """``Σ*_Y(u) = ∫_0^∞ f(s) ⊗ f(s+u) ds``, defined for every real ``u``."""
    return sigma_y_star_batch(model, [u])[0]


# --- Vec-form limit -------------------------------------------------------------


def _transpose(stack: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.swapaxes(stack, 1, 2)


def limit_covariance_vec(
    model: McarmaModel,
    h: float,
    tol: float = DEFAULT_TOL,
    *,
    horizon_factor: float = 1.0,
) -> LimitCovariance:
    """Asymptotic covariance of ``√(nΔ) vec(Γ̂_n(h) - Γ(h))`` (``d² x d²``)."""
    if h < 0.0:
        raise ValueError("lag must be non-negative")
    forms = _forms(model)
    sigma_l = model.driver.sigma_L
    s = np.kron(sigma_l, sigma_l)
    r = kron_permutation(model.m) @ s
    envelope = model.a.envelope
    scale = forms.e_norm**4 * forms.k_norm**2 * float(np.linalg.norm(s, 2))

    def tail(horizon: float) -> float:
        return envelope.tail(horizon - h, power=2, scale=scale)

    def forward_term(u: NDArray[np.float64]) -> NDArray[np.float64]:
        lead = sigma_y_batch(model, u + h)
        return lead @ s @ _transpose(lead)

    def backward_term(u: NDArray[np.float64]) -> NDArray[np.float64]:
        lag = sigma_y_star_batch(model, u - h)
        return lag @ s @ _transpose(lag)

    def cross_term(u: NDArray[np.float64]) -> NDArray[np.float64]:
        return sigma_y_batch(model, u + h) @ r @ _transpose(sigma_y_star_batch(model, u - h))

    def cross_term_transposed(u: NDArray[np.float64]) -> NDArray[np.float64]:
        return sigma_y_star_batch(model, u - h) @ r.T @ _transpose(sigma_y_batch(model, u + h))

    integrands = (
        ("forward", forward_term),
        ("backward", backward_term),
        ("cross", cross_term),
        ("cross_transposed", cross_term_transposed),
    )
    integrals: Dict[str, QuadratureResult] = {
        name: integrate_halfline(integrand, tail, tol, breakpoints=(h,), horizon_factor=horizon_factor)
        for name, integrand in integrands
    }
    terms = {name: result.value for name, result in integrals.items()}
    gaussian = sum(terms.values())
    gaussian = 0.5 * (gaussian + gaussian.T)

    lead = sigma_y(model, h)
    fourth = lead @ model.driver.upsilon @ lead.T
    fourth = 0.5 * (fourth + fourth.T)
    report: Dict[str, object] = {name: result.to_dict() for name, result in integrals.items()}
    report["tolerance"] = tol
    return LimitCovariance(float(h), fourth + gaussian, fourth, gaussian, report, terms)


# --- Scalar Bartlett formulas ----------------------------------------------------


def _require_scalar(model: McarmaModel) -> None:
    if not model.is_scalar:
        raise DimensionError("this formula is defined for scalar CARMA models only (d = m = 1)")


def _gamma(model: McarmaModel) -> Callable[[NDArray[np.float64]], NDArray[np.float64]]:
    return lambda x: acvf_batch(model, np.abs(x))[:, 0, 0]


def _folded(g: Callable[[NDArray[np.float64]], NDArray[np.float64]]) -> Callable[[NDArray[np.float64]], NDArray[np.float64]]:
    """Turn an integrand over the real line into one over ``[0, ∞)``."""
    return lambda u: g(u) + g(-u)


def bartlett_acvf_parts(model: McarmaModel, s: float, t: float, tol: float = DEFAULT_TOL) -> LimitCovariance:
    """``m_{s,t}`` split into the ``θ/σ⁴`` term and the ``u``-integral."""
    _require_scalar(model)
    if s < 0.0 or t < 0.0:
        raise ValueError("lags must be non-negative")
    gamma = _gamma(model)
    forms = _forms(model)

    def integrand(u: NDArray[np.float64]) -> NDArray[np.float64]:
        return gamma(u + s) * gamma(u + t) + gamma(u + s) * gamma(u - t)

    shift = 0.5 * (s + t)
    scale = 4.0 * forms.gamma_bound**2
    result = integrate_halfline(
        _folded(integrand),
        lambda horizon: model.a.envelope.tail(horizon - shift, power=2, scale=scale),
        tol,
        breakpoints=(s, t),
    )
    gamma_s, gamma_t = gamma(np.array([s, t]))
    fourth = kurtosis_coefficient(model.driver) * gamma_s * gamma_t
    return _scalar_limit((float(s), float(t)), float(fourth), float(result.value), {"integral": result.to_dict()})


def bartlett_acvf_cov(model: McarmaModel, s: float, t: float, tol: float = DEFAULT_TOL) -> float:
    """``m_{s,t} = (θ/σ⁴) γ(s) γ(t) + ∫_ℝ γ(u+s)γ(u+t) + γ(u+s)γ(u-t) du``."""
    return float(bartlett_acvf_parts(model, s, t, tol).total)


def bartlett_acf_cov(model: McarmaModel, s: float, t: float, tol: float = DEFAULT_TOL) -> float:
    """Bartlett ``v_{s,t}`` for sample autocorrelations at ``s, t > 0``."""
    _require_scalar(model)
    if not (s > 0.0 and t > 0.0):
        raise ValueError("autocorrelation lags must be positive")
    gamma = _gamma(model)
    gamma0 = float(gamma(np.zeros(1))[0])
    forms = _forms(model)
    rho = lambda x: gamma(x) / gamma0  # noqa: E731
    rho_s, rho_t = rho(np.array([s, t]))

    def integrand(u: NDArray[np.float64]) -> NDArray[np.float64]:
        ru = rho(u)
        return (
            rho(u + s) * rho(u + t)
            + rho(u - s) * rho(u + t)
            + 2.0 * rho_s * rho_t * ru**2
            - 2.0 * rho_s * ru * rho(u + t)
            - 2.0 * rho_t * ru * rho(u + s)
        )

    shift = max(s, t)
    scale = 16.0 * (forms.gamma_bound / gamma0) ** 2
    result = integrate_halfline(
        _folded(integrand),
        lambda horizon: model.a.envelope.tail(horizon - shift, power=2, scale=scale),
        tol,
        breakpoints=(s, t),
    )
    return float(result.value)


# --- Cross-covariances -------------------------------------------------------------


def cross_cov_limit_parts(
    model: McarmaModel,
    i: int,
    j: int,
    h: float,
    tol: float = DEFAULT_TOL,
    *,
    mc_budget: int = 1_000_000,
) -> LimitCovariance:
    """Limit variance of ``√(nΔ) γ̂^{(ij)}_n(h)`` with 1-based components."""
    d, m = model.d, model.m
    if not (1 <= i <= d and 1 <= j <= d):
        raise DimensionError(f"components must lie in 1..{d}, got ({i}, {j})")
    if h < 0.0:
        raise ValueError("lag must be non-negative")
    selector = np.zeros(d * d)
    selector[(j - 1) * d + (i - 1)] = 1.0
    weights = sigma_y(model, h).T @ selector

    driver = model.driver
    report: Dict[str, object] = {}
    if isinstance(driver, BrownianMotion):
        nu_value, nu_stderr, exact = 0.0, 0.0, True
    elif driver.independent_components:
        diagonal = weights[[l * m + l for l in range(m)]]
        nu_value, nu_stderr, exact = float(driver.thetas @ diagonal**2), 0.0, True
    else:
        form = QuadraticForm(weights)
        functional = nu_quadratic_functional(driver, form, form, mc_budget)
        nu_value, nu_stderr, exact = functional.value, functional.stderr, functional.exact

    forms = _forms(model)

    def integrand(u: NDArray[np.float64]) -> NDArray[np.float64]:
        at_u = acvf_batch(model, u)
        ahead = acvf_batch(model, u + h)
        behind = acvf_batch(model, u - h)
        return 2.0 * (at_u[:, i - 1, i - 1] * at_u[:, j - 1, j - 1] + ahead[:, i - 1, j - 1] * behind[:, j - 1, i - 1])

    result = integrate_halfline(
        integrand,
        lambda horizon: model.a.envelope.tail(horizon - h, power=2, scale=4.0 * forms.gamma_bound**2),
        tol,
        breakpoints=(h,),
    )
    gaussian = float(result.value)
    report["integral"] = result.to_dict()
    report["nu_exact"] = exact
    report["nu_stderr"] = nu_stderr
    if not exact and nu_stderr >= NU_FLAG_RATIO * abs(gaussian):
        report["nu_flagged"] = True
        logger.warning(
            "ν-functional standard error %.3e exceeds %.0f%% of the Gaussian part %.3e",
            nu_stderr, 100 * NU_FLAG_RATIO, gaussian,
        )
    return _scalar_limit(float(h), nu_value, gaussian, report)


def cross_cov_limit_var(model: McarmaModel, i: int, j: int, h: float, tol: float = DEFAULT_TOL) -> float:
    return float(cross_cov_limit_parts(model, i, j, h, tol).total)


# --- Fixed grid step comparison ------------------------------------------------------


@dataclass(frozen=True)
class FixedDeltaVariance:
    """Variance of ``n^{-1/2} Σ (Y_{kΔ}² - γ(0)²)`` on a fixed grid and its ``Δ``-scaled value."""

    delta: float
    kernel_term: float
    zero_lag_term: float
    series_term: float

    @property
    def bracket(self) -> float:
        return self.kernel_term + self.zero_lag_term + self.series_term

    @property
    def scaled(self) -> float:
        return self.delta * self.bracket


def _squared_forms(model: McarmaModel) -> Tuple[Matrix, Matrix, NDArray[np.float64], NDArray[np.float64]]:
    a = model.a.a
    generator = kron_sum(a, a)
    ev = model.e @ model.state_cov
    return generator, kron_sum(a.T, a.T), np.kron(ev, ev).ravel(), np.kron(model.e, model.e).ravel()


def fixed_delta_discrete_variance(model: McarmaModel, delta: float, tol: float = DEFAULT_TOL) -> FixedDeltaVariance:
    """``θ ∫_0^Δ f_Δ(u)² du + 2γ(0)² + 4 Σ_{k≥1} γ(kΔ)²`` with ``f_Δ(u) = Σ_k f(u + kΔ)²``.

    Both series are geometric in ``e^{(A⊕A)Δ}`` and are summed in closed form.
    """
    _require_scalar(model)
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    generator, generator_t, ev_ev, e_e = _squared_forms(model)
    identity = np.eye(generator.shape[0])
    b_b = np.kron(model.b, model.b).ravel()

    step = expm(generator, delta)
    resolvent = linalg.solve(identity - step, b_b)

    def f_delta(u: NDArray[np.float64]) -> NDArray[np.float64]:
        return expm(generator, u) @ resolvent @ e_e

    folded = integrate_interval(lambda u: f_delta(u) ** 2, 0.0, delta, tol)
    step_t = expm(generator_t, delta)
    series = float(ev_ev @ linalg.solve(identity - step_t, step_t @ e_e))
    gamma0 = float(model.e @ model.state_cov @ model.e.T)

    theta = float(model.driver.upsilon[0, 0])
    return FixedDeltaVariance(
        delta=float(delta),
        kernel_term=theta * float(folded.value),
        zero_lag_term=2.0 * gamma0**2,
        series_term=4.0 * series,
    )


def fixed_delta_limit(model: McarmaModel) -> float:
    """``(θ/σ⁴) γ(0)² + 4 ∫_0^∞ γ(s)² ds``, the ``Δ → 0`` limit of the scaled fixed-grid variance."""
    _require_scalar(model)
    _, generator_t, ev_ev, e_e = _squared_forms(model)
    integral = float(ev_ev @ linalg.solve(-generator_t, e_e))
    gamma0 = float(model.e @ model.state_cov @ model.e.T)
    return kurtosis_coefficient(model.driver) * gamma0**2 + 4.0 * integral


def ma_limit(model: MaModel, h: int, pair: Optional[Tuple[int, int]] = None) -> LimitCovariance:
    """Discrete-time counterpart of :func:`limit_for`; sums replace the integrals."""
    if pair is not None:
        s, t = pair
        total = ma_bartlett_acvf_cov(model, s, t)
        gamma_s, gamma_t = ma_acvf(model, int(s))[0, 0], ma_acvf(model, int(t))[0, 0]
        fourth = ma_fourth_cumulant_ratio(model) * gamma_s * gamma_t
        return _scalar_limit((float(s), float(t)), float(fourth), float(total - fourth), {"exact": True})
    fourth, gaussian = ma_limit_parts(model, h)
    report: Dict[str, object] = {"exact": True, "upsilon_stderr": model.noise.upsilon_stderr, "tail": model.tail}
    return LimitCovariance(float(h), fourth + gaussian, fourth, gaussian, report)


def _ma_cross_limit(model: MaModel, i: int, j: int, h: int) -> LimitCovariance:
    d = model.d
    if not (1 <= i <= d and 1 <= j <= d):
        raise DimensionError(f"components must lie in 1..{d}, got ({i}, {j})")
    full = ma_limit(model, h)
    index = (j - 1) * d + (i - 1)
    return _scalar_limit(
        float(h),
        float(full.fourth_moment_part[index, index]),
        float(full.gaussian_part[index, index]),
        full.quadrature_report,
    )


def limit_for(
    model: Union[McarmaModel, MaModel],
    h: float,
    pair: Optional[Tuple[float, float]] = None,
    tol: float = DEFAULT_TOL,
    *,
    cross: Optional[Tuple[int, int]] = None,
    mc_budget: int = 1_000_000,
) -> LimitCovariance:
    """Vec-form limit at ``h``; for a lag pair the scalar Bartlett ``m_{s,t}``;
    for ``cross=(i, j)`` the variance of the ``(i, j)`` cross-covariance."""
    if isinstance(model, MaModel):
        if cross is not None:
            return _ma_cross_limit(model, cross[0], cross[1], h)
        return ma_limit(model, h, pair)
    if cross is not None:
        return cross_cov_limit_parts(model, cross[0], cross[1], h, tol, mc_budget=mc_budget)
    if pair is not None:
        return bartlett_acvf_parts(model, pair[0], pair[1], tol)
    return limit_covariance_vec(model, h, tol)
