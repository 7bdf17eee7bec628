"""Command-line front end: ``simulate``, ``acf``, ``limit`` and ``verify``.

Commands hang off the Flask CLI, so ``python run.py verify --config ou_brownian``
and ``flask --app app verify ...`` behave the same. ``--config`` takes either a
path to a JSON configuration or the name of a shipped reference configuration.
"""
from __future__ import annotations

import io
import logging
import math
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Sequence, Tuple

import click
from flask import Flask, current_app
from flask.cli import with_appcontext

from .services.asymptotics import limit_for
from .services.config import FORMATS, Config, load_config, load_reference, reference_names
from .services.errors import ToolkitError
from .services.estimators import LagSet, sample_acvf
from .services.harness import rate_verification, run_experiment, sample_path
from .services.serialization import (
    dumps,
    estimate_to_dict,
    limits_to_json,
    load_path,
    save_path,
    save_report,
    write_estimate_csv,
)
from .services.streams import RandomStream

logger = logging.getLogger(__name__)

SEED = click.IntRange(0, 2**64 - 1)


class LagType(click.ParamType):
    """A finite, non-negative lag; anything else is a usage error."""

    name = "lag"

    def convert(self, value, param, ctx):  # type: ignore[override]
        if isinstance(value, float):
            return value
        try:
            lag = float(value)
        except (TypeError, ValueError):
            self.fail(f"{value!r} is not a number", param, ctx)
        if not math.isfinite(lag) or lag < 0.0:
            self.fail(f"{value!r} is not a non-negative lag", param, ctx)
        return lag


LAG = LagType()


@contextmanager
def _diagnostics() -> Iterator[None]:
    try:
        yield
    except ToolkitError as exc:
        raise click.ClickException(str(exc)) from exc
    except ValueError as exc:
        # argument checks inside the services, e.g. a non-integer lag for a discrete model
        raise click.UsageError(str(exc)) from exc
    except OSError as exc:
        raise click.ClickException(f"{exc.filename or 'output'}: {exc.strerror}") from exc


def _load(reference: str) -> Config:
    if Path(reference).is_file():
        return load_config(reference)
    if reference in reference_names():
        return load_reference(reference)
    raise click.BadParameter(
        f"'{reference}' is neither a file nor one of {', '.join(reference_names())}",
        param_hint="--config",
    )


def _output_dir(config: Optional[Config], out: Optional[Path]) -> Path:
    if out is not None:
        return out
    if config is not None and "output" in config.raw:
        return Path(config.output.directory)
    return Path(current_app.config["OUTPUT_DIR"])


def _emit(text: str, target: Optional[Path]) -> None:
    if target is None:
        click.echo(text, nl=False)
        return
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
    click.echo(f"wrote {target}", err=True)


config_option = click.option(
    "--config", "config_ref", required=True, metavar="PATH|NAME",
    help="Configuration file or shipped reference name.",
)
out_option = click.option(
    "--out", type=click.Path(file_okay=False, path_type=Path), default=None,
    help="Output directory.",
)


@click.command("simulate")
@config_option
@click.option("--seed", type=SEED, default=None, help="Overrides the configured seed.")
@click.option("--n", "n", type=click.IntRange(min=1), default=None, help="Number of observations.")
@click.option("--delta", type=click.FloatRange(min=0.0, min_open=True), default=None, help="Grid step.")
@out_option
@with_appcontext
def simulate_command(
    config_ref: str, seed: Optional[int], n: Optional[int], delta: Optional[float], out: Optional[Path]
) -> None:
    """Simulate one sample path and write it to OUT/path.csv."""
    with _diagnostics():
        config = _load(config_ref)
        block = config.simulation
        if block is None and n is None:
            raise click.UsageError("the configuration has no simulation block; pass --n and --delta")
        n = n if n is not None else block.n
        delta = delta if delta is not None else (block.delta if block is not None else 1.0)
        seed = seed if seed is not None else (block.seed if block is not None else 0)
        path = sample_path(
            config.model, n, delta, RandomStream(seed),
            max_burn_in_steps=current_app.config["MAX_BURN_IN_STEPS"],
        )
        target = save_path(path, _output_dir(config, out) / "path.csv")
    logger.info("simulated %d observations of model %s", path.n, path.model_id)
    click.echo(f"seed: {seed}")
    click.echo(f"wrote {target}")


@click.command("acf")
@click.argument("path_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--lag", "lags", type=LAG, multiple=True, required=True, help="Grid lag; repeatable.")
@click.option("--raw", is_flag=True, help="Use raw products instead of mean-adjusted ones.")
@click.option("--format", "fmt", type=click.Choice(FORMATS), default="csv", show_default=True)
@out_option
@with_appcontext
def acf_command(path_file: Path, lags: Sequence[float], raw: bool, fmt: str, out: Optional[Path]) -> None:
    """Sample autocovariances of a path file written by ``simulate``."""
    with _diagnostics():
        path = load_path(path_file)
        estimate = sample_acvf(path, LagSet.from_lags(lags, path.delta), mean_adjusted=not raw)
        if fmt == "json":
            text = dumps(estimate_to_dict(estimate))
        else:
            buffer = io.StringIO()
            write_estimate_csv(estimate, buffer)
            text = buffer.getvalue()
        _emit(text, None if out is None else out / f"acf.{fmt}")


@click.command("limit")
@config_option
@click.option("--lag", "lags", type=LAG, multiple=True, help="Lag h of the vec-form limit; repeatable.")
@click.option("--pair", type=(LAG, LAG), default=None, metavar="S T", help="Scalar Bartlett m_{s,t}.")
@click.option("--cross", type=(click.IntRange(min=1), click.IntRange(min=1)), default=None, metavar="I J",
              help="Cross-covariance (i, j) variance at each --lag.")
@out_option
@with_appcontext
def limit_command(
    config_ref: str,
    lags: Sequence[float],
    pair: Optional[Tuple[float, float]],
    cross: Optional[Tuple[int, int]],
    out: Optional[Path],
) -> None:
    """Closed-form limit covariances as JSON."""
    if not lags and pair is None:
        raise click.UsageError("pass at least one --lag or a --pair")
    if cross is not None and pair is not None:
        raise click.UsageError("--cross and --pair are mutually exclusive")
    settings = current_app.config
    with _diagnostics():
        config = _load(config_ref)
        limits = [
            limit_for(
                config.model, h, tol=settings["QUADRATURE_TOL"], cross=cross, mc_budget=settings["NU_MC_BUDGET"]
            )
            for h in lags
        ]
        if pair is not None:
            limits.append(limit_for(config.model, pair[0], pair, tol=settings["QUADRATURE_TOL"]))
        _emit(limits_to_json(limits), None if out is None else out / "limit.json")


@click.command("verify")
@config_option
@click.option("--seed", type=SEED, default=None, help="Overrides the experiment seed.")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker processes for replications.")
@click.option("--format", "formats", type=click.Choice(FORMATS), multiple=True, help="Report format; repeatable.")
@click.option("--truth-override", type=float, default=None, help="Compare against this value instead of the truth.")
@out_option
@with_appcontext
def verify_command(
    config_ref: str,
    seed: Optional[int],
    threads: Optional[int],
    formats: Sequence[str],
    truth_override: Optional[float],
    out: Optional[Path],
) -> None:
    """Run the configured experiment; exit status 1 when the limit is not reproduced."""
    settings = current_app.config
    threads = threads or int(settings["THREADS"])
    with _diagnostics():
        config = _load(config_ref)
        if not config.has_experiment:
            raise click.UsageError("the configuration has no experiment block")
        spec = config.experiment_spec(
            seed,
            truth_override,
            quadrature_tol=settings["QUADRATURE_TOL"],
            max_burn_in_steps=settings["MAX_BURN_IN_STEPS"],
        )
        report = run_experiment(spec, threads)
        rate = rate_verification(spec, report, threads) if config.rate_requested else None
        written = save_report(report, _output_dir(config, out), formats or config.output.formats, rate)

    last = report.points[-1]
    for label, ratio, z in zip(report.labels, last.diagonal_ratio, last.mean_z):
        click.echo(f"lag {label}: variance ratio {ratio:.4f}, mean z {z:+.2f}")
    if rate is not None:
        click.echo(f"rate slopes: {', '.join(f'{s:.3f}' for s in rate.slopes)}")
    for target in written:
        click.echo(f"wrote {target}")

    passed = report.passed and (rate is None or rate.passed)
    click.echo("PASS" if passed else "FAIL")
    if not passed:
        click.get_current_context().exit(1)


def register_commands(app: Flask) -> None:
    for command in (simulate_command, acf_command, limit_command, verify_command):
        app.cli.add_command(command)
