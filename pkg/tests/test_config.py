"""Configuration parsing and the shipped reference configurations."""
from __future__ import annotations

import json

import pytest

from app.services.config import load_config, load_reference, parse_config, reference_names, reference_text
from app.services.discrete_ma import MaModel, StudentTNoise
from app.services.errors import ConfigError
from app.services.harness import Statistic
from app.services.levy import CompoundPoisson, IndependentComponents
from app.services.mcarma import McarmaModel

REFERENCES = ["bivariate_ou", "carma21", "ma1", "ou_brownian", "ou_compound_poisson", "ou_rate"]


def _config(**blocks) -> str:
    document = {"model": {"type": "mcarma", "ar": [1.0], "ma": [1.0], "driver": {"type": "brownian", "sigma": [[1.0]]}}}
    document.update(blocks)
    return json.dumps(document)


def test_reference_names() -> None:
    assert reference_names() == REFERENCES


@pytest.mark.parametrize("name", REFERENCES)
def test_every_reference_parses(name) -> None:
    config = load_reference(name)
    assert config.has_experiment
    spec = config.experiment_spec()
    assert spec.model is config.model
    assert spec.replications == 2000


def test_unknown_reference() -> None:
    with pytest.raises(KeyError):
        reference_text("nope")


def test_reference_details() -> None:
    poisson = load_reference("ou_compound_poisson")
    assert isinstance(poisson.model, McarmaModel)
    assert isinstance(poisson.model.driver, CompoundPoisson)
    assert poisson.simulation.n == 1000 and poisson.simulation.seed == 7
    assert poisson.output.directory == "out/ou_compound_poisson"

    bivariate = load_reference("bivariate_ou").experiment_spec()
    assert bivariate.statistic == Statistic("cross", 1, 2)
    assert bivariate.band == pytest.approx(0.15)

    rate = load_reference("ou_rate")
    assert rate.rate_requested and rate.simulation is None
    assert isinstance(load_reference("ma1").model, MaModel)


def test_seed_and_settings_override_the_file() -> None:
    spec = load_reference("ou_brownian").experiment_spec(seed=99, truth_override=1.0, quadrature_tol=1e-8)
    assert spec.base_seed == 99
    assert spec.truth_override == 1.0
    assert spec.quadrature_tol == 1e-8


def test_syntax_error_reports_the_line() -> None:
    with pytest.raises(ConfigError) as info:
        parse_config('{\n  "model": {\n    "ar": [1.0,]\n  }\n}')
    assert info.value.line == 3
    assert "line 3" in str(info.value)


def test_missing_driver_reports_the_field() -> None:
    text = json.dumps({"model": {"type": "mcarma", "ar": [1.0], "ma": [1.0]}})
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "model.driver"


@pytest.mark.parametrize(
    "model, field",
    [
        ({"type": "arima"}, "model.type"),
        ({"type": "mcarma", "ar": [1.0], "ma": [1.0], "driver": {"type": "stable"}}, "model.driver.type"),
        ({"type": "mcarma", "ar": [], "ma": [1.0], "driver": {"type": "brownian", "sigma": [[1.0]]}}, "model.ar"),
        (
            {"type": "mcarma", "ar": [1.0], "ma": [1.0], "driver": {"type": "compound_poisson", "rate": "fast"}},
            "model.driver.rate",
        ),
        ({"type": "mcarma", "ar": [-1.0], "ma": [1.0], "driver": {"type": "brownian", "sigma": [[1.0]]}}, "model"),
        ({"type": "varma", "ar": [[[0.5]]], "noise": {"type": "gaussian", "cov": [[1.0]]}, "truncation": 2.5}, "model.varma"),
    ],
)
def test_semantic_errors_name_the_field(model, field) -> None:
    with pytest.raises(ConfigError) as info:
        parse_config(json.dumps({"model": model}))
    expected = "model.truncation" if field == "model.varma" else field
    assert info.value.field == expected


def test_independent_and_varma_models() -> None:
    config = parse_config(
        json.dumps(
            {
                "model": {
                    "type": "mcarma",
                    "ar": [[[1.0, 0.0], [0.0, 2.0]]],
                    "ma": [[[1.0, 0.0], [0.0, 1.0]]],
                    "driver": {
                        "type": "independent",
                        "components": [
                            {"type": "brownian", "sigma": [[1.0]]},
                            {"type": "compound_poisson", "rate": 1.0, "jumps": {"type": "gaussian", "mean": [0.0], "cov": [[1.0]]}},
                        ],
                    },
                }
            }
        )
    )
    assert isinstance(config.model.driver, IndependentComponents)

    varma = parse_config(
        json.dumps({"model": {"type": "varma", "ar": [[[0.5]]], "noise": {"type": "student_t", "df": 8, "scale": [1.0]}, "truncation": 30}})
    )
    assert isinstance(varma.model, MaModel)
    assert isinstance(varma.model.noise, StudentTNoise)
    assert varma.model.order == 30


def test_simulation_and_output_blocks() -> None:
    config = parse_config(_config(simulation={"n": 10, "delta": 0.5}, output={"directory": "results", "formats": ["csv"]}))
    assert (config.simulation.n, config.simulation.delta, config.simulation.seed) == (10, 0.5, 0)
    assert config.output.formats == ("csv",)
    assert not config.has_experiment

    with pytest.raises(ConfigError) as info:
        parse_config(_config(output={"formats": ["xml"]}))
    assert info.value.field == "output.formats"
    with pytest.raises(ConfigError):
        parse_config(_config(simulation={"n": 0}))


def test_experiment_errors_name_the_field() -> None:
    config = parse_config(_config(experiment={"schedule": [[100, 0.1]], "lags": ["zero"]}))
    with pytest.raises(ConfigError) as info:
        config.experiment_spec()
    assert info.value.field == "experiment.lags[0]"

    config = parse_config(_config(experiment={"schedule": [100, 0.1], "lags": [0.0]}))
    with pytest.raises(ConfigError) as info:
        config.experiment_spec()
    assert info.value.field == "experiment.schedule"

    config = parse_config(_config(experiment={"schedule": [[100, 0.1]], "lags": [0.0], "statistic": "bogus"}))
    with pytest.raises(ConfigError):
        config.experiment_spec()


def test_load_config_from_disk(tmp_path) -> None:
    target = tmp_path / "model.json"
    target.write_text(_config(simulation={"n": 5, "delta": 0.1}), encoding="utf-8")
    config = load_config(target)
    assert config.simulation.n == 5
