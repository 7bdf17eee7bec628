"""HTTP endpoints for the MCARMA limit-theory toolkit."""
from __future__ import annotations

from http import HTTPStatus
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from flask import Flask, current_app, jsonify, request

from .services.asymptotics import limit_for
from .services.config import Model, load_reference, parse_model, reference_names
from .services.discrete_ma import MaModel, ma_acvf
from .services.estimators import LagSet, sample_acvf
from .services.harness import Statistic
from .services.mcarma import McarmaModel, SamplePath, acvf
from .services.serialization import estimate_to_dict, to_plain


def _error(message: str, status: HTTPStatus = HTTPStatus.BAD_REQUEST) -> Tuple[Any, HTTPStatus]:
    return jsonify({"error": message}), status


def _summary(name: str, model: Model) -> Dict[str, Any]:
    summary: Dict[str, Any] = {
        "name": name,
        "model_id": model.model_id,
        "d": model.d,
        "definition": model.describe(),
    }
    if isinstance(model, McarmaModel):
        spectrum = model.a.eigenvalues
        summary.update({
            "p": model.p,
            "q": model.q,
            "lambda": model.lam.tolist(),
            "b": model.b.tolist(),
            "e": model.e.tolist(),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in spectrum],
            "spectral_abscissa": model.a.spectral_abscissa,
            "gamma0": acvf(model, 0.0).tolist(),
        })
    else:
        summary.update({"order": model.order, "tail": model.tail, "gamma0": ma_acvf(model, 0).tolist()})
    return summary


def _lags(raw: Any) -> List[float]:
    if not isinstance(raw, list) or not raw:
        raise ValueError("'lags' must be a non-empty list of numbers")
    lags = []
    for value in raw:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"lag {value!r} is not a number")
        lags.append(float(value))
    return lags


def _model_from_body(body: Dict[str, Any]) -> Model:
    """Inline ``config`` model block, else a reference name; unknown names raise ``KeyError``."""
    if "config" in body:
        return parse_model(body["config"])
    return load_reference(str(body.get("model", ""))).model


def register_routes(app: Flask) -> None:
    """Register API routes on the provided Flask app."""

    @app.get("/api/models")
    def list_models() -> Any:
        """Shipped reference configurations."""
        models = []
        for name in reference_names():
            model = load_reference(name).model
            models.append({"name": name, "type": model.describe()["type"], "d": model.d})
        return jsonify({"models": models, "count": len(models)})

    @app.get("/api/models/<string:name>")
    def get_model(name: str) -> Any:
        if name not in reference_names():
            return _error(f"unknown model '{name}'", HTTPStatus.NOT_FOUND)
        return jsonify(to_plain(_summary(name, load_reference(name).model)))

    @app.get("/api/models/<string:name>/acvf")
    def get_acvf(name: str) -> Any:
        """Theoretical autocovariance ``Γ(h)`` at ``?lag=h``."""
        if name not in reference_names():
            return _error(f"unknown model '{name}'", HTTPStatus.NOT_FOUND)
        try:
            lag = float(request.args.get("lag", "0"))
        except ValueError:
            return _error("lag must be a number")
        model = load_reference(name).model
        try:
            gamma = ma_acvf(model, lag) if isinstance(model, MaModel) else acvf(model, lag)
        except ValueError as exc:
            return _error(str(exc))
        return jsonify({"name": name, "lag": lag, "acvf": np.asarray(gamma).tolist()})

    @app.post("/api/limit")
    def post_limit() -> Any:
        """Limit covariances for a reference model or an inline model block.

        Body: ``{"model": name | "config": {...}, "lags": [...], "statistic": "acvf" | "cross(i,j)", "pair": [s, t]}``.
        """
        body = request.get_json(silent=True) or {}
        settings = current_app.config
        try:
            model = _model_from_body(body)
            statistic = Statistic.parse(str(body.get("statistic", "acvf")))
            cross: Optional[Tuple[int, int]] = None
            if statistic.kind == "cross":
                cross = (statistic.i, statistic.j)
            elif statistic.kind != "acvf":
                raise ValueError("the limit endpoint serves the acvf and cross(i,j) statistics")
            pair = body.get("pair")
            if pair is not None:
                if not isinstance(pair, list) or len(pair) != 2:
                    raise ValueError("'pair' must be [s, t]")
                s, t = _lags(pair)
                limits = [limit_for(model, s, (s, t), tol=settings["QUADRATURE_TOL"])]
            else:
                limits = [
                    limit_for(model, h, tol=settings["QUADRATURE_TOL"], cross=cross, mc_budget=settings["NU_MC_BUDGET"])
                    for h in _lags(body.get("lags"))
                ]
        except KeyError as exc:
            return _error(f"unknown model {exc}", HTTPStatus.NOT_FOUND)
        except ValueError as exc:
            return _error(str(exc))
        return jsonify({"model_id": model.model_id, "limits": [to_plain(limit.to_dict()) for limit in limits]})

    @app.post("/api/estimate")
    def post_estimate() -> Any:
        """Sample autocovariances of posted observations (rows are grid points)."""
        body = request.get_json(silent=True) or {}
        try:
            observations = np.asarray(body.get("observations"), dtype=float)
            if observations.ndim == 1:
                observations = observations[:, np.newaxis]
            if observations.ndim != 2:
                raise ValueError("'observations' must be a list of rows")
            delta = float(body.get("delta", 1.0))
            path = SamplePath(delta, observations)
            estimate = sample_acvf(
                path,
                LagSet.from_lags(_lags(body.get("lags")), delta),
                mean_adjusted=bool(body.get("mean_adjusted", True)),
            )
        except (TypeError, ValueError) as exc:
            return _error(str(exc))
        return jsonify(estimate_to_dict(estimate))
