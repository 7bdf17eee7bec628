"""Dense linear-algebra primitives for the Kronecker/vec calculus of MCARMA asymptotics.

Matrices are plain ``numpy`` arrays; ``vec`` stacks columns (Fortran order) so
that ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)`` holds with ``numpy.kron``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import ArrayLike, NDArray
from scipy import linalg

from .errors import DimensionError, QuadratureError, SingularSystemError, ToolkitError, UnstableSpectrumError

logger = logging.getLogger(__name__)

Matrix = NDArray[np.float64]
Vector = NDArray[np.float64]

STABILITY_TOL = 1e-10
_LYAPUNOV_RESIDUAL_TOL = 1e-10


def as_matrix(value: ArrayLike, name: str = "matrix") -> Matrix:
    """Coerce ``value`` to a finite two-dimensional float array."""
    matrix = np.array(value, dtype=float, ndmin=2)
    if matrix.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {matrix.shape}")
    if matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(matrix)):
        raise ToolkitError(f"{name} contains non-finite entries")
    return matrix


def _require_square(matrix: Matrix, name: str) -> int:
    if matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {matrix.shape}")
    return matrix.shape[0]


def is_psd(matrix: Matrix, tol: float = 1e-10) -> bool:
    """Symmetric with eigenvalues >= -tol (relative to the largest entry)."""
    scale = max(float(np.max(np.abs(matrix))), 1.0)
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-10 * scale):
        return False
    return bool(np.min(np.linalg.eigvalsh(0.5 * (matrix + matrix.T))) >= -tol * scale)


def psd_factor(cov: ArrayLike) -> Matrix:
    """Return ``F`` with ``F @ F.T == cov`` for a (possibly singular) PSD matrix."""
    cov = as_matrix(cov, "cov")
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (cov + cov.T))
    return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


def vec(m: ArrayLike) -> Vector:
    """Stack the columns of ``m`` into one vector."""
    return as_matrix(m).reshape(-1, order="F")


def unvec(v: ArrayLike, rows: int, cols: int) -> Matrix:
    """Inverse of :func:`vec`."""
    return np.asarray(v, dtype=float).reshape((rows, cols), order="F")


def kron(a: ArrayLike, b: ArrayLike) -> Matrix:
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def kron_sum(a: ArrayLike, b: ArrayLike) -> Matrix:
    """Kronecker sum ``a ⊗ I + I ⊗ b`` of two square matrices."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    n_a = _require_square(a, "a")
    n_b = _require_square(b, "b")
    return np.kron(a, np.eye(n_b)) + np.kron(np.eye(n_a), b)


def kron_permutation(m: int) -> Matrix:
    """Return the commutation matrix ``P`` with ``P (x ⊗ y) = y ⊗ x`` for ``x, y`` in R^m."""
    if m < 1:
        raise DimensionError("kron_permutation needs m >= 1")
    perm = np.zeros((m * m, m * m))
    for i in range(m):
        for j in range(m):
            perm[i * m + j, j * m + i] = 1.0
    return perm


def expm(a: ArrayLike, t: Union[float, ArrayLike] = 1.0) -> NDArray[np.float64]:
    """Matrix exponential of ``a * t``.

    ``t`` may be an array of times, in which case a stack of exponentials with
    shape ``(len(t), n, n)`` is returned. Scaling and squaring with a degree-13
    Padé approximant (``scipy.linalg.expm``).
    """
    a = as_matrix(a, "a")
    _require_square(a, "a")
    times = np.asarray(t, dtype=float)
    if times.ndim == 0:
        return linalg.expm(a * float(times))
    return linalg.expm(a[np.newaxis, :, :] * times.reshape(-1, 1, 1))


@dataclass(frozen=True, eq=False)
class DecayEnvelope:
    """Upper bound ``||exp(A t)|| <= c * exp(-alpha * t)`` for a stable ``A``."""

    c: float
    alpha: float

    def bound(self, t: float) -> float:
        return self.c * math.exp(-self.alpha * t)

    def tail(self, horizon: float, *, power: int = 1, scale: float = 1.0) -> float:
        """Bound on ``∫_T^∞ scale * (c e^{-alpha s})^power ds``."""
        rate = power * self.alpha
        return scale * self.c**power * math.exp(-rate * horizon) / rate

    def settling_time(self, threshold: float) -> float:
        """Smallest ``T`` with ``c * exp(-alpha T) <= threshold``."""
        if self.c <= threshold:
            return 0.0
        return math.log(self.c / threshold) / self.alpha


def fit_envelope(a: Matrix, spectral_abscissa: float) -> DecayEnvelope:
    """Fit ``c`` on a grid after fixing ``alpha`` slightly inside the spectral abscissa."""
    alpha = abs(spectral_abscissa) * (1.0 - 1e-3)
    horizon = max(5.0, 5.0 / alpha)
    times = np.linspace(0.0, horizon, 101)
    norms = np.linalg.norm(expm(a, times), ord=2, axis=(1, 2))
    c = float(max(1.0, np.max(norms * np.exp(alpha * times))))
    return DecayEnvelope(c=c, alpha=alpha)


@dataclass(frozen=True, eq=False)
class StableMatrix:
    """A square matrix whose eigenvalues all have real part below ``-1e-10``."""

    a: Matrix
    eigenvalues: NDArray[np.complex128] = field(init=False, repr=False, compare=False)
    envelope: DecayEnvelope = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        matrix = as_matrix(self.a, "a")
        _require_square(matrix, "a")
        eigenvalues = np.linalg.eigvals(matrix)
        abscissa = float(np.max(eigenvalues.real))
        if abscissa >= -STABILITY_TOL:
            raise UnstableSpectrumError(
                f"matrix is not stable: largest eigenvalue real part {abscissa:.3e} >= {-STABILITY_TOL:.0e}"
            )
        object.__setattr__(self, "a", matrix)
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "envelope", fit_envelope(matrix, abscissa))

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def spectral_abscissa(self) -> float:
        return float(np.max(self.eigenvalues.real))


def lyapunov_stationary(a: StableMatrix, q: ArrayLike) -> Matrix:
    """Solve ``A V + V A^T + Q = 0``, i.e. ``V = ∫_0^∞ e^{As} Q e^{A^T s} ds``.

    The Kronecker-sum system ``(I ⊗ A + A ⊗ I) vec(V) = -vec(Q)`` is solved
    directly; intended for state dimensions up to about 30.
    """
    q = as_matrix(q, "q")
    n = a.dim
    if q.shape != (n, n):
        raise DimensionError(f"q must be {n}x{n}, got {q.shape}")
    scale = max(float(np.max(np.abs(q))), np.finfo(float).tiny)
    if not np.allclose(q, q.T, rtol=0.0, atol=1e-12 * scale):
        raise ToolkitError("q must be symmetric")

    system = kron_sum(a.a, a.a)
    try:
        solution = linalg.solve(system, -vec(q))
    except linalg.LinAlgError as exc:
        raise SingularSystemError(f"Kronecker-sum system is singular: {exc}") from exc

    v = unvec(solution, n, n)
    v = 0.5 * (v + v.T)
    residual = np.linalg.norm(a.a @ v + v @ a.a.T + q)
    q_norm = np.linalg.norm(q)
    if residual > _LYAPUNOV_RESIDUAL_TOL * max(q_norm, 1.0):
        logger.warning("Lyapunov residual %.3e exceeds tolerance for ||Q|| = %.3e", residual, q_norm)
    return v


# --- Quadrature -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadratureResult:
    value: NDArray[np.float64]
    error: float
    truncation: float
    panels: int

    def to_dict(self) -> dict:
        return {"error": self.error, "truncation": self.truncation, "panels": self.panels}


_NODE_CACHE: dict = {}


def _nodes(order: int) -> Tuple[np.ndarray, np.ndarray]:
    if order not in _NODE_CACHE:
        _NODE_CACHE[order] = leggauss(order)
    return _NODE_CACHE[order]


def _panel(f: Callable[[np.ndarray], ArrayLike], a: float, b: float, order: int) -> np.ndarray:
    nodes, weights = _nodes(order)
    half = 0.5 * (b - a)
    points = 0.5 * (a + b) + half * nodes
    values = np.asarray(f(points), dtype=float)
    if values.shape[:1] != (order,):
        raise DimensionError("integrand must return one value per node along the first axis")
    return half * np.tensordot(weights, values, axes=(0, 0))


def _adaptive(
    f: Callable[[np.ndarray], ArrayLike],
    edges: Sequence[float],
    tol: float,
    order: int,
    max_panels: int,
) -> Tuple[np.ndarray, float, int]:
    span = edges[-1] - edges[0]
    pending = [(lo, hi, _panel(f, lo, hi, order)) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]
    accepted = []
    error = 0.0
    evaluated = len(pending)
    while pending:
        lo, hi, whole = pending.pop()
        mid = 0.5 * (lo + hi)
        left = _panel(f, lo, mid, order)
        right = _panel(f, mid, hi, order)
        evaluated += 2
        refined = left + right
        difference = float(np.max(np.abs(refined - whole)))
        if difference <= tol * (hi - lo) / span or hi - lo < 1e-12 * span:
            accepted.append((lo, refined))
            error += difference
            continue
        if evaluated > max_panels:
            raise QuadratureError(
                f"tolerance {tol:.1e} not reached within {max_panels} panels on [{edges[0]}, {edges[-1]}]"
            )
        pending.append((mid, hi, right))
        pending.append((lo, mid, left))
    accepted.sort(key=lambda item: item[0])
    total = np.sum([value for _, value in accepted], axis=0)
    return total, error, evaluated


def integrate_interval(
    f: Callable[[np.ndarray], ArrayLike],
    lower: float,
    upper: float,
    tol: float = 1e-10,
    *,
    order: int = 20,
    max_panels: int = 4096,
) -> QuadratureResult:
    """Adaptive composite Gauss–Legendre integration over ``[lower, upper]``.

    ``f`` receives a 1-D array of nodes and returns values stacked on axis 0.
    """
    if upper < lower:
        raise ValueError("integration limits must be increasing")
    if upper == lower:
        first = np.asarray(f(np.array([lower])), dtype=float)
        return QuadratureResult(np.zeros(first.shape[1:]), 0.0, upper, 0)
    value, error, panels = _adaptive(f, [lower, upper], tol, order, max_panels)
    return QuadratureResult(value, error, upper, panels)


def integrate_halfline(
    f: Callable[[np.ndarray], ArrayLike],
    tail_bound: Callable[[float], float],
    tol: float = 1e-10,
    *,
    breakpoints: Iterable[float] = (),
    order: int = 20,
    max_panels: int = 4096,
    horizon_factor: float = 1.0,
) -> QuadratureResult:
    """Integrate ``f`` over ``[0, ∞)``.

    The range is truncated at the first ``T*`` (doubling from 1) with
    ``tail_bound(T*) < tol / 2``; ``[0, T*]`` is integrated adaptively to
    ``tol / 2``. ``breakpoints`` mark kinks of the integrand and become panel
    edges. ``horizon_factor`` stretches ``T*`` for robustness checks.
    """
    kinks = sorted(float(b) for b in breakpoints if b > 0)
    horizon = max([1.0] + [k + 1.0 for k in kinks])
    while tail_bound(horizon) >= 0.5 * tol:
        horizon *= 2.0
        if horizon > 1e8:
            raise QuadratureError("tail bound never drops below tolerance; integrand does not decay")
    horizon *= horizon_factor

    edges = [0.0] + [k for k in kinks if k < horizon] + [horizon]
    fine = []
    width = horizon / 16.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        pieces = max(1, math.ceil((hi - lo) / width))
        fine.extend(np.linspace(lo, hi, pieces + 1)[:-1].tolist())
    fine.append(horizon)

    value, error, panels = _adaptive(f, fine, 0.5 * tol, order, max_panels)
    logger.debug("half-line quadrature: T*=%.3g, %d panels, error %.2e", horizon, panels, error)
    return QuadratureResult(value, error + tail_bound(horizon), horizon, panels)
