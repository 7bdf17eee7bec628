"""Causal MCARMA(p, q) models: construction, kernel, autocovariance and exact simulation."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import signal

from .errors import BurnInExceededError, DimensionError, SimulationError, ToolkitError
from .levy import LevyDriver
from .matrix_core import Matrix, StableMatrix, as_matrix, expm, lyapunov_stationary, psd_factor
from .streams import RandomStream

logger = logging.getLogger(__name__)

BURN_IN_THRESHOLD = 1e-8
DEFAULT_MAX_BURN_IN_STEPS = 10_000_000
_DIAGONAL_RECURSION_MAX_COND = 1e6


def model_checksum(spec: dict) -> str:
    canonical = json.dumps(spec, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True, eq=False)
class McarmaModel:
    ar: Tuple[Matrix, ...]
    ma: Tuple[Matrix, ...]
    driver: LevyDriver
    lam: Matrix
    e: Matrix
    b: Matrix
    a: StableMatrix
    state_cov: Matrix
    model_id: str

    @property
    def d(self) -> int:
        return self.e.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def p(self) -> int:
        return len(self.ar)

    @property
    def q(self) -> int:
        return len(self.ma) - 1

    @property
    def pd(self) -> int:
        return self.lam.shape[0]

    @property
    def is_scalar(self) -> bool:
        return self.d == 1 and self.m == 1

    def describe(self) -> dict:
        return {
            "type": "mcarma",
            "ar": [block.tolist() for block in self.ar],
            "ma": [block.tolist() for block in self.ma],
            "driver": self.driver.describe(),
        }


def _companion(ar: Sequence[Matrix], d: int) -> Matrix:
    p = len(ar)
    companion = np.zeros((p * d, p * d))
    for block in range(p - 1):
        companion[block * d:(block + 1) * d, (block + 1) * d:(block + 2) * d] = np.eye(d)
    for i, coefficient in enumerate(ar, start=1):
        column = p - i
        companion[(p - 1) * d:, column * d:(column + 1) * d] = -coefficient
    return companion


def _input_blocks(ar: Sequence[Matrix], ma: Sequence[Matrix], d: int, m: int) -> Matrix:
    """``B_1 = ... = B_{p-q-1} = 0`` and ``B_{p-j} = -Σ_{i=1}^{p-j-1} P_i B_{p-j-i} + Q_{q-j}``."""
    p, q = len(ar), len(ma) - 1
    blocks = [np.zeros((d, m)) for _ in range(p + 1)]  # 1-based
    for j in range(q, -1, -1):
        index = p - j
        total = ma[q - j].copy()
        for i in range(1, index):
            total -= ar[i - 1] @ blocks[index - i]
        blocks[index] = total
    return np.vstack(blocks[1:])


def build_model(ar: Sequence[ArrayLike], ma: Sequence[ArrayLike], driver: LevyDriver) -> McarmaModel:
    """Assemble ``Λ``, ``E`` and ``B`` and validate stationarity.

    ``ar`` holds ``P_1..P_p`` (``d x d``) and ``ma`` holds ``Q_0..Q_q`` (``d x m``).
    """
    if not ar:
        raise DimensionError("at least one autoregressive coefficient is required")
    if not ma:
        raise DimensionError("at least one moving-average coefficient is required")
    ar_blocks = tuple(as_matrix(block, f"ar[{i}]") for i, block in enumerate(ar))
    ma_blocks = tuple(as_matrix(block, f"ma[{i}]") for i, block in enumerate(ma))
    p, q = len(ar_blocks), len(ma_blocks) - 1
    if q >= p:
        raise DimensionError(f"moving-average order q={q} must be smaller than p={p}")
    d = ar_blocks[0].shape[0]
    m = ma_blocks[0].shape[1]
    for i, block in enumerate(ar_blocks):
        if block.shape != (d, d):
            raise DimensionError(f"ar[{i}] must be {d}x{d}, got {block.shape}")
    for i, block in enumerate(ma_blocks):
        if block.shape != (d, m):
            raise DimensionError(f"ma[{i}] must be {d}x{m}, got {block.shape}")
    if not np.any(ma_blocks[0]):
        raise ToolkitError("Q_0 must not be the zero matrix")
    if driver.dim != m:
        raise DimensionError(f"driver dimension {driver.dim} does not match Q_j columns {m}")
    sigma_l = driver.sigma_L
    if not np.any(sigma_l):
        raise ToolkitError("driver covariance is zero; the model is degenerate")

    lam = -_companion(ar_blocks, d)
    b = _input_blocks(ar_blocks, ma_blocks, d, m)
    e = np.hstack([np.eye(d)] + [np.zeros((d, d))] * (p - 1))
    a = StableMatrix(-lam)
    state_cov = lyapunov_stationary(a, b @ sigma_l @ b.T)

    spec = {
        "type": "mcarma",
        "ar": [block.tolist() for block in ar_blocks],
        "ma": [block.tolist() for block in ma_blocks],
        "driver": driver.describe(),
    }
    model = McarmaModel(ar_blocks, ma_blocks, driver, lam, e, b, a, state_cov, model_checksum(spec))
    logger.debug("built MCARMA(%d,%d) d=%d m=%d id=%s", p, q, d, m, model.model_id[:12])
    return model


def kernel(model: McarmaModel, t: float) -> Matrix:
    """``f(t) = E e^{-Λt} B`` for ``t > 0`` and zero otherwise."""
    if t <= 0.0:
        return np.zeros((model.d, model.m))
    return model.e @ expm(model.a.a, t) @ model.b


def kernel_batch(model: McarmaModel, times: ArrayLike) -> NDArray[np.float64]:
    """Kernel values stacked along the first axis."""
    times = np.asarray(times, dtype=float).reshape(-1)
    values = model.e @ expm(model.a.a, np.clip(times, 0.0, None)) @ model.b
    values[times <= 0.0] = 0.0
    return values


def transfer_function(model: McarmaModel, z: complex) -> NDArray[np.complex128]:
    """``E (zI - A)^{-1} B``, the Laplace transform of the kernel."""
    resolvent = np.linalg.solve(z * np.eye(model.pd) - model.a.a, model.b.astype(complex))
    return model.e @ resolvent


def stationary_state_cov(model: McarmaModel) -> Matrix:
    """``E(Z_0 Z_0^T)``, the solution of ``A V + V A^T + B Σ_L B^T = 0``."""
    return model.state_cov.copy()


def acvf(model: McarmaModel, h: float) -> Matrix:
    """``Γ_Y(h) = E V e^{A^T h} E^T`` for ``h >= 0``."""
    if h < 0.0:
        raise ValueError("acvf expects h >= 0; use Γ(-h) = Γ(h)^T")
    return model.e @ model.state_cov @ expm(model.a.a, h).T @ model.e.T


def acvf_batch(model: McarmaModel, lags: ArrayLike) -> NDArray[np.float64]:
    """``Γ_Y(h)`` for an array of lags of any sign, stacked along the first axis."""
    lags = np.asarray(lags, dtype=float).reshape(-1)
    transitions = expm(model.a.a, np.abs(lags))
    values = np.einsum("ij,jk,nlk,ml->nim", model.e, model.state_cov, transitions, model.e)
    negative = lags < 0.0
    values[negative] = np.swapaxes(values[negative], 1, 2)
    return values


def increment_covariance(model: McarmaModel, delta: float, cov: Optional[Matrix] = None) -> Tuple[Matrix, Matrix]:
    """Return ``(e^{AΔ}, Σ_ξ(Δ))`` with ``Σ_ξ(Δ) = ∫_0^Δ e^{As} B C B^T e^{A^T s} ds``.

    ``C`` defaults to the Brownian part of the driver. Computed from one block
    exponential ``exp([[A, BCB^T], [0, -A^T]] Δ)``.
    """
    cov = model.driver.gaussian_cov if cov is None else cov
    n = model.pd
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = model.a.a
    block[:n, n:] = model.b @ cov @ model.b.T
    block[n:, n:] = -model.a.a.T
    exponential = expm(block, delta)
    transition = exponential[:n, :n]
    sigma_xi = exponential[:n, n:] @ transition.T
    return transition, 0.5 * (sigma_xi + sigma_xi.T)


def state_recursion(transition: Matrix, innovations: NDArray[np.float64], initial: NDArray[np.float64]) -> NDArray[np.float64]:
    """Run ``Z_k = Φ Z_{k-1} + ξ_k`` for ``k = 1..N`` and return ``Z_1..Z_N``."""
    n = transition.shape[0]
    if n == 1:
        phi = transition[0, 0]
        out = signal.lfilter([1.0], [1.0, -phi], innovations[:, 0], zi=[phi * initial[0]])[0]
        return out[:, np.newaxis]

    eigenvalues, vectors = np.linalg.eig(transition)
    if np.linalg.cond(vectors) < _DIAGONAL_RECURSION_MAX_COND:
        modal = np.linalg.solve(vectors, innovations.T.astype(complex)).T
        modal_initial = np.linalg.solve(vectors, initial.astype(complex))
        for i, w in enumerate(eigenvalues):
            modal[:, i] = signal.lfilter([1.0], [1.0, -w], modal[:, i], zi=[w * modal_initial[i]])[0]
        return (modal @ vectors.T).real

    states = np.empty_like(innovations)
    current = initial
    for k in range(innovations.shape[0]):
        current = transition @ current + innovations[k]
        states[k] = current
    return states


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Grid observations ``Y_Δ, ..., Y_{nΔ}`` as an ``n x d`` matrix."""

    delta: float
    observations: NDArray[np.float64]
    seed: Optional[int] = None
    model_id: Optional[str] = None

    def __post_init__(self) -> None:
        observations = np.array(self.observations, dtype=float, ndmin=2)
        if observations.shape[0] < 1:
            raise ToolkitError("a sample path needs at least one observation")
        if not np.all(np.isfinite(observations)):
            raise ToolkitError("sample path contains non-finite values")
        if not self.delta > 0.0:
            raise ToolkitError("grid step must be positive")
        object.__setattr__(self, "observations", observations)

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def d(self) -> int:
        return self.observations.shape[1]

    @property
    def times(self) -> NDArray[np.float64]:
        return self.delta * np.arange(1, self.n + 1)


def burn_in_steps(model: McarmaModel, delta: float) -> int:
    if not model.driver.has_jumps:
        return 0
    return math.ceil(model.a.envelope.settling_time(BURN_IN_THRESHOLD) / delta)


def simulate(
    model: McarmaModel,
    n: int,
    delta: float,
    stream: RandomStream,
    *,
    max_burn_in_steps: int = DEFAULT_MAX_BURN_IN_STEPS,
) -> SamplePath:
    """Exact-law simulation of ``Y_{kΔ}``, ``k = 1..n``.

    The Brownian part of each ``ξ_k`` is drawn from its exact Gaussian law; the
    jump part is ``Σ e^{A(Δ-τ)} B J`` over the jump epochs plus the transported
    compensating drift. Gaussian models start in the stationary law; models
    with jumps burn in until ``||e^{A T}|| <= 1e-8``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not delta > 0.0:
        raise ValueError("delta must be positive")

    burn = burn_in_steps(model, delta)
    if burn > max_burn_in_steps:
        raise BurnInExceededError(f"burn-in needs {burn} steps, budget is {max_burn_in_steps}")
    steps = burn + n
    rng = stream.rng
    a = model.a.a

    transition, sigma_xi = increment_covariance(model, delta)
    innovations = rng.standard_normal((steps, model.pd)) @ psd_factor(sigma_xi).T

    driver = model.driver
    if driver.has_jumps:
        events = driver.jump_events(delta, steps, stream)
        if events.offsets.size:
            transports = expm(a, delta - events.offsets)
            contributions = np.einsum("kij,kj->ki", transports, events.jumps @ model.b.T)
            np.add.at(innovations, events.step, contributions)
        drift = np.linalg.solve(a, (transition - np.eye(model.pd)) @ model.b @ driver.drift_rate)
        innovations += drift

    initial = psd_factor(model.state_cov) @ rng.standard_normal(model.pd)
    states = state_recursion(transition, innovations, initial)
    if not np.all(np.isfinite(states)):
        raise SimulationError("non-finite state encountered during simulation")
    if burn:
        logger.debug("discarded %d burn-in steps", burn)
    return SamplePath(delta, states[burn:] @ model.e.T, stream.seed, model.model_id)
