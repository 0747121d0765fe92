"""Command-line entry points for the experiment harness.

One subcommand per experiment kind plus `validate` for config checking.
Exit codes: 0 success, 2 config error, 3 more than 10% of solves failed,
4 I/O error.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys

import click

from .harness import (
    ConfigError,
    config_to_dict,
    emit_csv,
    emit_summary,
    failure_fraction,
    parse_config,
    run_dof_sweep,
    run_maxmin_sweep,
    run_power_feasibility,
)

EXIT_CONFIG = 2
EXIT_FAILURES = 3
EXIT_IO = 4


def _load(config_path, kind, seed):
    try:
        cfg = parse_config(config_path)
        if cfg.kind != kind:
            raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand {kind!r}")
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=seed)
        return cfg
    except ConfigError as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(EXIT_CONFIG)


def _emit(rows, out_dir, stem, extra=None):
    try:
        os.makedirs(out_dir, exist_ok=True)
        emit_csv(rows, os.path.join(out_dir, stem + ".csv"))
        summary = emit_summary(rows, os.path.join(out_dir, stem + "_summary.json"))
        if extra:
            with open(os.path.join(out_dir, stem + "_fits.json"), "w") as fh:
                json.dump(extra, fh, indent=2)
    except (IOError, OSError) as err:
        click.echo(f"I/O error: {err}", err=True)
        sys.exit(EXIT_IO)
    frac = failure_fraction(rows)
    if frac > 0.10:
        click.echo(f"{frac:.0%} of solves failed", err=True)
        sys.exit(EXIT_FAILURES)
    return summary


common_options = [
    click.option("--config", "config_path", required=True,
                 type=click.Path(exists=False), help="JSON experiment config."),
    click.option("--out-dir", default=".", show_default=True,
                 help="Directory for CSV/JSON outputs."),
    click.option("--seed", type=int, default=None,
                 help="Override the config seed."),
    click.option("--jobs", type=int, default=1, show_default=True,
                 help="Channel-level parallel workers."),
]


def add_options(opts):
    def wrap(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return wrap


@click.group()
def main():
    """Robust rate-splitting precoder design experiments."""


@main.command()
@add_options(common_options)
def maxmin(config_path, out_dir, seed, jobs):
    """Max-min rate sweep over SNR (rate-curve experiment)."""
    cfg = _load(config_path, "maxmin", seed)
    rows = run_maxmin_sweep(cfg, jobs=jobs)
    _emit(rows, out_dir, "maxmin")
    click.echo(f"wrote {len(rows)} rows to {out_dir}/maxmin.csv")


@main.command()
@add_options(common_options)
def minpower(config_path, out_dir, seed, jobs):
    """Power minimization under a rate target (feasibility experiment)."""
    cfg = _load(config_path, "minpower", seed)
    rows = run_power_feasibility(cfg, jobs=jobs)
    _emit(rows, out_dir, "minpower")
    click.echo(f"wrote {len(rows)} rows to {out_dir}/minpower.csv")


@main.command()
@add_options(common_options)
def dof(config_path, out_dir, seed, jobs):
    """DoF slope estimation for the constructive schemes."""
    cfg = _load(config_path, "dof", seed)
    rows, fits = run_dof_sweep(cfg, jobs=jobs)
    serializable = {
        name: (dataclasses.asdict(fit) if dataclasses.is_dataclass(fit) else fit)
        for name, fit in fits.items()
    }
    _emit(rows, out_dir, "dof", extra=serializable)
    for name, fit in fits.items():
        if dataclasses.is_dataclass(fit):
            click.echo(f"{name}: slope {fit.slope:.4f} (r2 {fit.r2:.4f})")
        else:
            click.echo(f"{name}: {fit}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=False))
def validate(config_path):
    """Parse a config, apply defaults, and print the normalized form."""
    try:
        cfg = parse_config(config_path)
    except ConfigError as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(json.dumps(config_to_dict(cfg), indent=2))


if __name__ == "__main__":
    main()
