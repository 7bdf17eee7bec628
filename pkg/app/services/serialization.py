"""File layouts: sample paths, estimates, limit covariances and experiment reports.

Floats are written with 17 significant digits so files are byte-stable and
round-trip exactly, the time column of a sample path included.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import IO, Dict, Iterable, List, Optional, Union

import numpy as np

from .asymptotics import LimitCovariance
from .errors import ToolkitError
from .estimators import AcfEstimate
from .harness import ExperimentReport, RateReport
from .mcarma import SamplePath

PathLike = Union[str, Path]


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def to_plain(value: object) -> object:
    """Replace NaN and infinities with ``None`` so the output is strict JSON."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {key: to_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, np.generic):
        return to_plain(value.item())
    return value


def dumps(payload: Dict[str, object]) -> str:
    return json.dumps(to_plain(payload), indent=2) + "\n"


# --- Sample paths -----------------------------------------------------------------


def write_path_csv(path: SamplePath, handle: IO[str]) -> None:
    """Header ``t,y1,...,yd`` and one row per grid point ``kΔ``."""
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["t"] + [f"y{i + 1}" for i in range(path.d)])
    for k, row in enumerate(path.observations, start=1):
        writer.writerow([fmt(k * path.delta)] + [fmt(value) for value in row])


def read_path_csv(handle: IO[str]) -> SamplePath:
    reader = csv.reader(handle)
    header = next(reader, None)
    if not header or header[0] != "t" or len(header) < 2:
        raise ToolkitError("sample path CSV must start with a 't,y1,...' header")
    times: List[float] = []
    rows: List[List[float]] = []
    for line, record in enumerate(reader, start=2):
        if not record:
            continue
        if len(record) != len(header):
            raise ToolkitError(f"line {line}: expected {len(header)} columns, got {len(record)}")
        try:
            times.append(float(record[0]))
            rows.append([float(value) for value in record[1:]])
        except ValueError as exc:
            raise ToolkitError(f"line {line}: {exc}") from exc
    if not rows:
        raise ToolkitError("sample path CSV has no observations")
    return SamplePath(times[0], np.array(rows))


def save_path(path: SamplePath, target: PathLike) -> Path:
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="") as handle:
        write_path_csv(path, handle)
    return target


def load_path(source: PathLike) -> SamplePath:
    with Path(source).open("r", encoding="utf-8", newline="") as handle:
        return read_path_csv(handle)


# --- Estimates and limits ----------------------------------------------------------


def write_estimate_csv(estimate: AcfEstimate, handle: IO[str]) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["lag", "i", "j", "value"])
    for lag, i, j, value in estimate.rows():
        writer.writerow([fmt(lag), i, j, fmt(value)])


def estimate_to_dict(estimate: AcfEstimate) -> Dict[str, object]:
    return {
        "n": estimate.n,
        "delta": estimate.delta,
        "mean_adjusted": estimate.mean_adjusted,
        "rows": [{"lag": lag, "i": i, "j": j, "value": value} for lag, i, j, value in estimate.rows()],
    }


def limits_to_json(limits: Iterable[LimitCovariance]) -> str:
    items = [limit.to_dict() for limit in limits]
    return dumps(items[0] if len(items) == 1 else {"limits": items})


# --- Experiment reports ------------------------------------------------------------------


def report_to_dict(report: ExperimentReport, rate: Optional[RateReport] = None) -> Dict[str, object]:
    """Everything except wall-clock timings, which would break byte-stability."""
    payload: Dict[str, object] = {
        "statistic": report.statistic,
        "labels": report.labels,
        "base_seed": report.base_seed,
        "replications": report.replications,
        "band": report.band,
        "mean_z_max": report.mean_z_max,
        "truth": report.truth,
        "passed": report.passed,
        "band_ok": report.band_ok,
        "mean_ok": report.mean_ok,
        "normality_ok": report.normality_ok,
        "points": [
            {
                "n": point.n,
                "delta": point.delta,
                "empirical": point.empirical,
                "theoretical": point.theoretical,
                "ratio": point.ratio,
                "mean_z": point.mean_z,
                "median_abs_error": point.median_abs_error,
                "normality": [item.to_dict() for item in point.normality],
            }
            for point in report.points
        ],
    }
    if rate is not None:
        payload["rate"] = rate.to_dict()
    return payload


def write_report_csv(report: ExperimentReport, handle: IO[str]) -> None:
    """Flat layout ``schedule_idx, lag_i, lag_j, empirical, theoretical, ratio``."""
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["schedule_idx", "lag_i", "lag_j", "empirical", "theoretical", "ratio"])
    labels = report.labels
    for index, point in enumerate(report.points):
        for a, first in enumerate(labels):
            for b, second in enumerate(labels):
                writer.writerow(
                    [index, first, second, fmt(point.empirical[a, b]), fmt(point.theoretical[a, b]), fmt(point.ratio[a, b])]
                )


def save_report(report: ExperimentReport, directory: PathLike, formats: Iterable[str], rate: Optional[RateReport] = None) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for kind in formats:
        target = directory / f"report.{kind}"
        with target.open("w", encoding="utf-8", newline="") as handle:
            if kind == "json":
                handle.write(dumps(report_to_dict(report, rate)))
            elif kind == "csv":
                write_report_csv(report, handle)
            else:
                raise ValueError(f"unknown report format '{kind}'")
        written.append(target)
    return written
