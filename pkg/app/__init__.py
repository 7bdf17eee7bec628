"""Flask application factory for the MCARMA limit-theory toolkit."""
from __future__ import annotations

import logging
from typing import Any, Mapping, Optional

from flask import Flask

from .api import register_routes
from .cli import register_commands

DEFAULTS = {
    "THREADS": 1,
    "LOG_LEVEL": "INFO",
    "QUADRATURE_TOL": 1e-10,
    "NU_MC_BUDGET": 1_000_000,
    "MAX_BURN_IN_STEPS": 10_000_000,
    "OUTPUT_DIR": "out",
}


def create_app(config: Optional[Mapping[str, Any]] = None) -> Flask:
    """Create and configure the application.

    Settings come from :data:`DEFAULTS`, then ``MCARMA_*`` environment
    variables, then ``config``.
    """
    app = Flask(__name__)
    app.config.from_mapping(DEFAULTS)
    app.config.from_prefixed_env("MCARMA")
    if config:
        app.config.update(config)
    logging.basicConfig(
        level=app.config["LOG_LEVEL"],
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    register_routes(app)
    register_commands(app)
    return app


app = create_app()
