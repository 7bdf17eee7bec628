"""State-space construction, second-order structure and exact simulation."""
from __future__ import annotations

import math

import numpy as np
import pytest

from app.services.errors import BurnInExceededError, DimensionError, ToolkitError, UnstableSpectrumError
from app.services.levy import BrownianMotion, CompoundPoisson, GaussianJumps
from app.services.matrix_core import integrate_halfline, is_psd
from app.services.mcarma import (
    SamplePath,
    acvf,
    acvf_batch,
    build_model,
    burn_in_steps,
    increment_covariance,
    kernel,
    kernel_batch,
    simulate,
    state_recursion,
    stationary_state_cov,
    transfer_function,
)
from app.services.streams import RandomStream


def test_carma_input_vector_and_companion(carma21) -> None:
    assert np.allclose(carma21.b, [[1.0], [-2.0]])
    assert np.allclose(carma21.a.a, [[0.0, 1.0], [-2.0, -3.0]])
    assert np.allclose(carma21.lam, -carma21.a.a)
    assert np.allclose(carma21.e, [[1.0, 0.0]])
    assert (carma21.p, carma21.q, carma21.d, carma21.m) == (2, 1, 1, 1)


def test_carma_kernel_reduces_to_single_exponential(carma21) -> None:
    for t in (0.1, 0.7, 2.5):
        assert kernel(carma21, t)[0, 0] == pytest.approx(math.exp(-2.0 * t), abs=1e-13)
    assert kernel(carma21, 0.0)[0, 0] == 0.0
    assert kernel(carma21, -1.0)[0, 0] == 0.0
    batch = kernel_batch(carma21, [-0.5, 0.0, 0.5])
    assert batch.shape == (3, 1, 1)
    assert batch[0, 0, 0] == 0.0 and batch[1, 0, 0] == 0.0
    assert batch[2, 0, 0] == pytest.approx(math.exp(-1.0))


def test_transfer_function_matches_polynomial_ratio(carma21) -> None:
    for z in (1.5, 0.3 + 2.0j):
        assert complex(transfer_function(carma21, z)[0, 0]) == pytest.approx(1.0 / (z + 2.0), abs=1e-13)


def test_ou_autocovariance_closed_form() -> None:
    a, b, sigma2 = 1.5, 2.0, 0.5
    model = build_model([a], [b], BrownianMotion(sigma2))
    for h in (0.0, 0.3, 1.0, 4.0):
        expected = sigma2 * b**2 * math.exp(-a * h) / (2 * a)
        assert acvf(model, h)[0, 0] == pytest.approx(expected, abs=1e-10)


def test_carma_autocovariance(carma21) -> None:
    # kernel e^{-2t} and unit driver variance
    assert acvf(carma21, 0.0)[0, 0] == pytest.approx(0.25, abs=1e-12)
    assert acvf(carma21, 0.5)[0, 0] == pytest.approx(0.25 * math.exp(-1.0), abs=1e-12)


@pytest.mark.parametrize("h", [0.0, 0.3, 1.0])
def test_lyapunov_route_matches_kernel_quadrature(h, ou_model, carma21, bivariate_model) -> None:
    for model in (ou_model, carma21, bivariate_model):
        sigma_l = model.driver.sigma_L
        scale = float(np.linalg.norm(model.e, 2) ** 2 * np.linalg.norm(model.b, 2) ** 2 * np.linalg.norm(sigma_l, 2))

        def integrand(s):
            return kernel_batch(model, s) @ sigma_l @ np.swapaxes(kernel_batch(model, s + h), 1, 2)

        result = integrate_halfline(
            integrand,
            lambda horizon: model.a.envelope.tail(horizon, power=2, scale=scale),
            1e-11,
        )
        assert np.allclose(acvf(model, h), result.value, atol=1e-8)


def test_lyapunov_route_on_random_carma_models() -> None:
    rng = np.random.default_rng(2024)
    for _ in range(20):
        p = int(rng.integers(1, 5))
        q = int(rng.integers(0, p))
        ar = np.poly(-rng.uniform(0.5, 2.5, size=p))[1:]
        ma = [1.0] + rng.normal(size=q).tolist()
        model = build_model(ar.tolist(), ma, BrownianMotion(1.0))
        scale = float(np.linalg.norm(model.b, 2) ** 2)

        for h in (0.0, 0.3, 1.0):

            def integrand(s, h=h):
                return kernel_batch(model, s) @ np.swapaxes(kernel_batch(model, s + h), 1, 2)

            result = integrate_halfline(
                integrand,
                lambda horizon: model.a.envelope.tail(horizon, power=2, scale=scale),
                1e-11,
            )
            assert np.allclose(acvf(model, h), result.value, atol=1e-8)


def test_acvf_at_negative_lags_is_transposed(bivariate_model) -> None:
    values = acvf_batch(bivariate_model, [-0.4, 0.4])
    assert np.allclose(values[0], acvf(bivariate_model, 0.4).T, atol=1e-14)
    assert np.allclose(values[1], acvf(bivariate_model, 0.4), atol=1e-14)
    assert not np.allclose(values[0], values[1])
    with pytest.raises(ValueError):
        acvf(bivariate_model, -0.4)


def test_stationary_covariance_is_psd(bivariate_model) -> None:
    v = stationary_state_cov(bivariate_model)
    assert is_psd(v)
    gamma0 = acvf(bivariate_model, 0.0)
    assert np.allclose(gamma0, gamma0.T)


def test_discrete_lyapunov_fixed_point(bivariate_model, ou_jump_model) -> None:
    for model in (bivariate_model, ou_jump_model):
        transition, sigma_xi = increment_covariance(model, 0.2, cov=model.driver.sigma_L)
        v = model.state_cov
        assert np.allclose(transition @ v @ transition.T + sigma_xi, v, atol=1e-12)


@pytest.mark.parametrize(
    "ar, ma, driver, error",
    [
        ([], [1.0], BrownianMotion(1.0), DimensionError),
        ([1.0], [1.0, 1.0], BrownianMotion(1.0), DimensionError),
        ([-1.0], [1.0], BrownianMotion(1.0), UnstableSpectrumError),
        ([1.0], [0.0], BrownianMotion(1.0), ToolkitError),
        ([1.0], [1.0], BrownianMotion(np.eye(2)), DimensionError),
        ([1.0], [1.0], CompoundPoisson(0.0, GaussianJumps([0.0], [[1.0]])), ToolkitError),
    ],
)
def test_build_model_rejects_invalid_input(ar, ma, driver, error) -> None:
    with pytest.raises(error):
        build_model(ar, ma, driver)


def test_model_id_is_a_content_checksum() -> None:
    first = build_model([1.0], [1.0], BrownianMotion(1.0))
    second = build_model([1.0], [1.0], BrownianMotion(1.0))
    other = build_model([2.0], [1.0], BrownianMotion(1.0))
    assert first.model_id == second.model_id
    assert first.model_id != other.model_id
    assert len(first.model_id) == 64


def test_state_recursion_matches_explicit_loop() -> None:
    rng = np.random.default_rng(0)
    transition = np.array([[0.9, 0.1, 0.0], [0.0, 0.8, 0.2], [0.05, 0.0, 0.7]])
    innovations = rng.standard_normal((500, 3))
    initial = rng.standard_normal(3)
    expected = np.empty_like(innovations)
    state = initial
    for k in range(innovations.shape[0]):
        state = transition @ state + innovations[k]
        expected[k] = state
    assert np.allclose(state_recursion(transition, innovations, initial), expected, atol=1e-10)

    scalar = state_recursion(np.array([[0.5]]), innovations[:, :1], initial[:1])
    assert scalar[0, 0] == pytest.approx(0.5 * initial[0] + innovations[0, 0])
    assert scalar[1, 0] == pytest.approx(0.5 * scalar[0, 0] + innovations[1, 0])


def test_state_recursion_with_defective_transition() -> None:
    transition = np.array([[0.5, 1.0], [0.0, 0.5]])
    innovations = np.ones((4, 2))
    states = state_recursion(transition, innovations, np.zeros(2))
    assert np.allclose(states[0], [1.0, 1.0])
    assert np.allclose(states[1], transition @ states[0] + 1.0)


def test_simulation_is_deterministic(ou_jump_model) -> None:
    first = simulate(ou_jump_model, 500, 0.05, RandomStream(17))
    second = simulate(ou_jump_model, 500, 0.05, RandomStream(17))
    other = simulate(ou_jump_model, 500, 0.05, RandomStream(18))
    assert np.array_equal(first.observations, second.observations)
    assert not np.array_equal(first.observations, other.observations)
    assert first.observations.shape == (500, 1)
    assert first.seed == 17 and first.model_id == ou_jump_model.model_id
    assert first.times[0] == pytest.approx(0.05) and first.times[-1] == pytest.approx(25.0)


def test_brownian_simulation_matches_stationary_variance(ou_model) -> None:
    path = simulate(ou_model, 200_000, 0.05, RandomStream(21))
    data = path.observations[:, 0]
    assert data.var() == pytest.approx(0.5, rel=0.05)
    lagged = np.mean((data[:-20] - data.mean()) * (data[20:] - data.mean()))
    assert lagged == pytest.approx(0.5 * math.exp(-1.0), abs=0.03)


def test_jump_simulation_matches_stationary_variance(ou_jump_model) -> None:
    path = simulate(ou_jump_model, 200_000, 0.05, RandomStream(22))
    assert path.observations[:, 0].var() == pytest.approx(1.0, rel=0.1)
    assert path.observations[:, 0].mean() == pytest.approx(0.0, abs=0.05)


def test_bivariate_simulation_covariance(bivariate_model) -> None:
    path = simulate(bivariate_model, 100_000, 0.1, RandomStream(23))
    empirical = np.cov(path.observations, rowvar=False)
    assert np.allclose(empirical, acvf(bivariate_model, 0.0), atol=0.1 * np.max(np.abs(acvf(bivariate_model, 0.0))))


def test_burn_in(ou_model, ou_jump_model) -> None:
    assert burn_in_steps(ou_model, 0.01) == 0
    steps = burn_in_steps(ou_jump_model, 0.01)
    assert steps >= math.ceil(math.log(1e8) / 0.01)
    with pytest.raises(BurnInExceededError):
        simulate(ou_jump_model, 10, 0.01, RandomStream(0), max_burn_in_steps=steps - 1)


def test_simulate_rejects_bad_arguments(ou_model) -> None:
    with pytest.raises(ValueError):
        simulate(ou_model, 0, 0.1, RandomStream(0))
    with pytest.raises(ValueError):
        simulate(ou_model, 10, 0.0, RandomStream(0))


def test_sample_path_validation() -> None:
    with pytest.raises(ToolkitError):
        SamplePath(0.1, [[np.inf]])
    with pytest.raises(ToolkitError):
        SamplePath(0.0, [[1.0]])
    path = SamplePath(0.5, [[1.0], [2.0], [3.0]])
    assert (path.n, path.d) == (3, 1)
