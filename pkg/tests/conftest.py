"""Pytest configuration for the project."""
from __future__ import annotations

import os
import sys
from typing import Generator

import pytest

# Ensure the application package is on sys.path when tests are executed from anywhere.
PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from app import create_app  # noqa: E402
from app.services.discrete_ma import GaussianNoise, MaModel  # noqa: E402
from app.services.levy import BrownianMotion, CompoundPoisson, GaussianJumps, TwoPointJumps  # noqa: E402
from app.services.mcarma import McarmaModel, build_model  # noqa: E402


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: Monte-Carlo acceptance checks that take more than a few seconds")


@pytest.fixture
def app():
    app = create_app({"TESTING": True, "LOG_LEVEL": "WARNING"})
    yield app


@pytest.fixture
def client(app) -> Generator:
    with app.test_client() as client:
        yield client


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture(scope="session")
def ou_model() -> McarmaModel:
    """``dY = -Y dt + dW``: ``γ(h) = e^{-h} / 2``."""
    return build_model([1.0], [1.0], BrownianMotion(1.0))


@pytest.fixture(scope="session")
def ou_jump_model() -> McarmaModel:
    """OU driven by compound Poisson, rate 2, N(0, 1) jumps: ``σ² = 2``, ``θ = 6``, ``γ(0) = 1``."""
    return build_model([1.0], [1.0], CompoundPoisson(2.0, GaussianJumps([0.0], [[1.0]])))


@pytest.fixture(scope="session")
def carma21() -> McarmaModel:
    """``P(z) = z² + 3z + 2``, ``Q(z) = z + 1``: the kernel reduces to ``e^{-2t}``."""
    return build_model([3.0, 2.0], [1.0, 1.0], CompoundPoisson(1.0, TwoPointJumps([[1.0], [-1.0]], 0.5)))


@pytest.fixture(scope="session")
def bivariate_model() -> McarmaModel:
    """A coupled bivariate MCARMA(2,1) with a correlated Brownian driver."""
    return build_model(
        [[[3.0, 0.2], [0.1, 3.0]], [[2.0, 0.1], [0.0, 2.0]]],
        [[[1.0, 0.0], [0.3, 1.0]], [[0.5, 0.0], [0.2, 0.5]]],
        BrownianMotion([[1.0, 0.3], [0.3, 0.5]]),
    )


@pytest.fixture(scope="session")
def independent_ou() -> McarmaModel:
    return build_model([[[1.0, 0.0], [0.0, 1.0]]], [[[1.0, 0.0], [0.0, 1.0]]], BrownianMotion([[1.0, 0.0], [0.0, 1.0]]))


@pytest.fixture(scope="session")
def ma1() -> MaModel:
    """``X_k = ξ_k + 0.5 ξ_{k-1}``, unit Gaussian noise: ``ρ(1) = 0.4``."""
    return MaModel((1.0, 0.5), GaussianNoise(1.0))
