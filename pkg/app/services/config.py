"""Experiment configuration files.

A configuration is one JSON document with a ``model`` block and optional
``simulation``, ``experiment`` and ``output`` blocks. Reference configurations
ship in ``app/data``. Syntax errors report the JSON line; semantic errors report
the dotted field path.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, List, Mapping, Optional, Tuple, Union

from .discrete_ma import GaussianNoise, MaModel, NoiseLaw, StudentTNoise, TwoPointNoise, materialize_varma
from .errors import ConfigError, ToolkitError
from .harness import ExperimentSpec, Statistic
from .levy import BrownianMotion, CompoundPoisson, GaussianJumps, IndependentComponents, JumpLaw, LevyDriver, TwoPointJumps
from .mcarma import McarmaModel, build_model


DATA_PACKAGE = "app.data"
FORMATS = ("json", "csv")

Model = Union[McarmaModel, MaModel]


def _require(block: Mapping[str, Any], key: str, path: str) -> Any:
    if not isinstance(block, Mapping):
        raise ConfigError("expected an object", field=path)
    if key not in block:
        raise ConfigError("missing required field", field=f"{path}.{key}" if path else key)
    return block[key]


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=path)
    return float(value)


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", field=path)
    return value


def _matrices(value: Any, path: str) -> List[Any]:
    if not isinstance(value, list) or not value:
        raise ConfigError("expected a non-empty list of matrices", field=path)
    return value


# --- Drivers and noise --------------------------------------------------------------


def _jump_law(block: Mapping[str, Any], path: str) -> JumpLaw:
    kind = _require(block, "type", path)
    if kind == "gaussian":
        return GaussianJumps(_require(block, "mean", path), _require(block, "cov", path))
    if kind == "two_point":
        return TwoPointJumps(_require(block, "values", path), _number(_require(block, "probability", path), f"{path}.probability"))
    raise ConfigError(f"unknown jump law '{kind}'", field=f"{path}.type")


def parse_driver(block: Mapping[str, Any], path: str = "model.driver") -> LevyDriver:
    kind = _require(block, "type", path)
    if kind == "brownian":
        return BrownianMotion(_require(block, "sigma", path))
    if kind == "compound_poisson":
        rate = _number(_require(block, "rate", path), f"{path}.rate")
        return CompoundPoisson(rate, _jump_law(_require(block, "jumps", path), f"{path}.jumps"))
    if kind == "independent":
        components = _require(block, "components", path)
        if not isinstance(components, list):
            raise ConfigError("expected a list of drivers", field=f"{path}.components")
        return IndependentComponents(tuple(parse_driver(c, f"{path}.components[{i}]") for i, c in enumerate(components)))
    raise ConfigError(f"unknown driver type '{kind}'", field=f"{path}.type")


def parse_noise(block: Mapping[str, Any], path: str = "model.noise") -> NoiseLaw:
    kind = _require(block, "type", path)
    if kind == "gaussian":
        return GaussianNoise(_require(block, "cov", path))
    if kind == "two_point":
        return TwoPointNoise(_require(block, "values", path), _number(_require(block, "probability", path), f"{path}.probability"))
    if kind == "student_t":
        return StudentTNoise(_number(_require(block, "df", path), f"{path}.df"), _require(block, "scale", path))
    raise ConfigError(f"unknown noise type '{kind}'", field=f"{path}.type")


def parse_model(block: Mapping[str, Any], path: str = "model") -> Model:
    kind = block.get("type", "mcarma") if isinstance(block, Mapping) else None
    try:
        if kind == "mcarma":
            ar = _matrices(_require(block, "ar", path), f"{path}.ar")
            ma = _matrices(_require(block, "ma", path), f"{path}.ma")
            return build_model(ar, ma, parse_driver(_require(block, "driver", path), f"{path}.driver"))
        if kind == "ma":
            coeffs = _matrices(_require(block, "coeffs", path), f"{path}.coeffs")
            return MaModel(tuple(coeffs), parse_noise(_require(block, "noise", path), f"{path}.noise"))
        if kind == "varma":
            noise = parse_noise(_require(block, "noise", path), f"{path}.noise")
            truncation = _integer(_require(block, "truncation", path), f"{path}.truncation")
            return materialize_varma(block.get("ar", []), block.get("ma", []), noise, truncation)
    except ConfigError:
        raise
    except ToolkitError as exc:
        raise ConfigError(str(exc), field=path) from exc
    raise ConfigError(f"unknown model type '{kind}'", field=f"{path}.type")


# --- Documents ----------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationBlock:
    n: int
    delta: float
    seed: int = 0


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "out"
    formats: Tuple[str, ...] = FORMATS


@dataclass(frozen=True, eq=False)
class Config:
    model: Model
    raw: Mapping[str, Any] = field(repr=False)
    simulation: Optional[SimulationBlock] = None
    output: OutputBlock = OutputBlock()

    @property
    def has_experiment(self) -> bool:
        return "experiment" in self.raw

    def experiment_spec(
        self,
        seed: Optional[int] = None,
        truth_override: Optional[float] = None,
        **settings: Any,
    ) -> ExperimentSpec:
        """Build the experiment; ``settings`` carries process-level knobs such as ``quadrature_tol``."""
        block = _require(self.raw, "experiment", "")
        path = "experiment"
        schedule = _require(block, "schedule", path)
        if not isinstance(schedule, list) or not all(isinstance(p, list) and len(p) == 2 for p in schedule):
            raise ConfigError("expected a list of [n, delta] pairs", field=f"{path}.schedule")
        lags = _require(block, "lags", path)
        if not isinstance(lags, list):
            raise ConfigError("expected a list of lags", field=f"{path}.lags")
        try:
            statistic = Statistic.parse(str(block.get("statistic", "acvf")))
            return ExperimentSpec(
                model=self.model,
                schedule=tuple(
                    (_integer(n, f"{path}.schedule[{i}][0]"), _number(delta, f"{path}.schedule[{i}][1]"))
                    for i, (n, delta) in enumerate(schedule)
                ),
                lags=tuple(_number(h, f"{path}.lags[{i}]") for i, h in enumerate(lags)),
                replications=_integer(block.get("replications", 2000), f"{path}.replications"),
                base_seed=seed if seed is not None else _integer(block.get("seed", 0), f"{path}.seed"),
                statistic=statistic,
                band=_number(block.get("band", 0.1), f"{path}.band"),
                mean_z_max=_number(block.get("mean_z_max", 6.0), f"{path}.mean_z_max"),
                truth_override=truth_override,
                **settings,
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), field=path) from exc

    @property
    def rate_requested(self) -> bool:
        return bool(self.raw.get("experiment", {}).get("rate", False))


def _simulation(block: Any) -> Optional[SimulationBlock]:
    if block is None:
        return None
    path = "simulation"
    n = _integer(_require(block, "n", path), f"{path}.n")
    delta = _number(block.get("delta", 1.0), f"{path}.delta")
    if n < 1 or not delta > 0.0:
        raise ConfigError("n must be at least 1 and delta positive", field=path)
    return SimulationBlock(n, delta, _integer(block.get("seed", 0), f"{path}.seed"))


def _output(block: Any) -> OutputBlock:
    if block is None:
        return OutputBlock()
    formats = block.get("formats", list(FORMATS))
    if not isinstance(formats, list) or any(f not in FORMATS for f in formats):
        raise ConfigError(f"formats must be a subset of {list(FORMATS)}", field="output.formats")
    return OutputBlock(str(block.get("directory", "out")), tuple(formats))


def parse_config(text: str) -> Config:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from exc
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object", line=1)
    model = parse_model(_require(raw, "model", ""))
    return Config(model=model, raw=raw, simulation=_simulation(raw.get("simulation")), output=_output(raw.get("output")))


def load_config(path: Union[str, Path]) -> Config:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def reference_names() -> List[str]:
    return sorted(
        entry.name[: -len(".json")]
        for entry in resources.files(DATA_PACKAGE).iterdir()
        if entry.name.endswith(".json")
    )


def reference_text(name: str) -> str:
    if name not in reference_names():
        raise KeyError(name)
    return resources.files(DATA_PACKAGE).joinpath(f"{name}.json").read_text(encoding="utf-8")


def load_reference(name: str) -> Config:
    """Parse a shipped reference configuration by name."""
    return parse_config(reference_text(name))
