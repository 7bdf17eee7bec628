"""File layouts for paths, estimates, limits and reports."""
from __future__ import annotations

import io
import json
import math

import numpy as np
import pytest

from app.services.asymptotics import limit_for
from app.services.errors import ToolkitError
from app.services.estimators import LagSet, sample_acvf
from app.services.harness import ExperimentSpec, run_experiment
from app.services.mcarma import SamplePath, simulate
from app.services.serialization import (
    dumps,
    estimate_to_dict,
    limits_to_json,
    load_path,
    read_path_csv,
    save_path,
    save_report,
    to_plain,
    write_estimate_csv,
    write_path_csv,
)
from app.services.streams import RandomStream


def test_path_csv_layout() -> None:
    path = SamplePath(0.1, [[1.0, -2.0], [0.1, 1.0 / 3.0]])
    handle = io.StringIO()
    write_path_csv(path, handle)
    lines = handle.getvalue().splitlines()
    assert lines[0] == "t,y1,y2"
    assert lines[1] == "0.10000000000000001,1,-2"
    assert lines[2] == "0.20000000000000001,0.10000000000000001,0.33333333333333331"


def test_path_grid_step_survives_the_file() -> None:
    path = SamplePath(1.0 / 3.0, [[1.0], [2.0], [3.0]])
    handle = io.StringIO()
    write_path_csv(path, handle)
    handle.seek(0)
    loaded = read_path_csv(handle)
    assert loaded.delta == 1.0 / 3.0
    assert loaded.times[-1] == path.times[-1]


def test_path_files_round_trip_exactly(tmp_path, ou_jump_model) -> None:
    path = simulate(ou_jump_model, 300, 0.01, RandomStream(2))
    target = save_path(path, tmp_path / "nested" / "path.csv")
    loaded = load_path(target)
    assert loaded.delta == pytest.approx(0.01)
    assert np.array_equal(loaded.observations, path.observations)


@pytest.mark.parametrize(
    "text",
    ["", "x,y1\n0.1,1\n", "t,y1\n0.1,1,2\n", "t,y1\n0.1,abc\n", "t,y1\n"],
)
def test_malformed_path_csv(text) -> None:
    with pytest.raises(ToolkitError):
        read_path_csv(io.StringIO(text))


def test_estimate_csv_and_dict() -> None:
    estimate = sample_acvf(SamplePath(0.5, [[1.0], [2.0], [3.0], [4.0]]), LagSet.from_lags([0.0, 0.5], 0.5))
    handle = io.StringIO()
    write_estimate_csv(estimate, handle)
    assert handle.getvalue() == "lag,i,j,value\n0,1,1,1.25\n0.5,1,1,0.3125\n"
    payload = estimate_to_dict(estimate)
    assert payload["n"] == 4 and payload["mean_adjusted"] is True
    assert payload["rows"][1] == {"lag": 0.5, "i": 1, "j": 1, "value": 0.3125}


def test_to_plain_makes_strict_json() -> None:
    payload = to_plain({"a": np.array([1.0, math.nan]), "b": np.float64(math.inf), "c": (np.int64(3),)})
    assert payload == {"a": [1.0, None], "b": None, "c": [3]}
    assert json.loads(dumps({"x": np.nan})) == {"x": None}


def test_limits_json_shape(ou_model) -> None:
    single = json.loads(limits_to_json([limit_for(ou_model, 0.0)]))
    assert single["lag"] == 0.0
    assert single["total"] == [[pytest.approx(0.5, abs=1e-8)]]
    assert set(single["quadrature_report"]) >= {"forward", "tolerance"}

    pair = json.loads(limits_to_json([limit_for(ou_model, 0.0, pair=(0.0, 1.0)), limit_for(ou_model, 1.0)]))
    assert len(pair["limits"]) == 2
    assert pair["limits"][0]["lag"] == [0.0, 1.0]


def test_reports_are_byte_stable(tmp_path, ma1) -> None:
    spec = ExperimentSpec(ma1, ((200, 1.0),), (0.0, 1.0), replications=200, base_seed=3, band=0.5)
    first = save_report(run_experiment(spec), tmp_path / "a", ("json", "csv"))
    second = save_report(run_experiment(spec), tmp_path / "b", ("json", "csv"))
    assert [p.name for p in first] == ["report.json", "report.csv"]
    for left, right in zip(first, second):
        assert left.read_bytes() == right.read_bytes()

    report = json.loads(first[0].read_text())
    assert report["labels"] == ["0", "1"]
    assert report["points"][0]["n"] == 200
    rows = first[1].read_text().splitlines()
    assert rows[0] == "schedule_idx,lag_i,lag_j,empirical,theoretical,ratio"
    assert len(rows) == 1 + 4


def test_unknown_report_format(tmp_path, ma1) -> None:
    spec = ExperimentSpec(ma1, ((100, 1.0),), (0.0,), replications=200)
    with pytest.raises(ValueError):
        save_report(run_experiment(spec), tmp_path, ("xml",))
