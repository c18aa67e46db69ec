"""Command line entry point.

Exit codes: 0 success, 2 config error, 3 physics/solver error, 4 I/O error.
"""

import json
import logging
import os
import sys

import click

from .config import parse_config
from .errors import ConfigError, RydtrapError
from .orchestrate import orchestrate

log = logging.getLogger("rydtrap")

EXPERIMENTS = ("solve-field", "calibrate", "frequencies", "depth", "lifetime",
               "dress-optimize", "ramsey", "echo", "stern-gerlach")


def _load_config(path, seed, out, no_cache, threads):
    doc = {}
    if path:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as ex:
            raise click.ClickException(f"cannot read config: {ex}") from ex
        except json.JSONDecodeError as ex:
            raise ConfigError(f"malformed JSON in {path}: {ex}") from ex
    run = doc.setdefault("run", {})
    if seed is not None:
        run["seed"] = seed
    if out is not None:
        run["out_dir"] = out
    if no_cache:
        run["cache"] = "off"
    if threads is not None:
        run["threads"] = threads
    return parse_config(doc)


def _execute(experiment, config, seed, out, no_cache, threads, **overrides):
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg = _load_config(config, seed, out, no_cache, threads)
    except ConfigError as ex:
        click.echo(f"config error: {ex}", err=True)
        sys.exit(2)
    if cfg.run["threads"]:
        os.environ["OMP_NUM_THREADS"] = str(cfg.run["threads"])
    try:
        summary = orchestrate(cfg, experiment, **overrides)
    except ConfigError as ex:
        click.echo(f"config error: {ex}", err=True)
        sys.exit(2)
    except RydtrapError as ex:
        click.echo(f"{experiment} failed: {ex}", err=True)
        sys.exit(3)
    except OSError as ex:
        click.echo(f"i/o error: {ex}", err=True)
        sys.exit(4)
    click.echo(json.dumps(summary, indent=2, sort_keys=True, default=float))


def _common(f):
    f = click.option("--config", type=click.Path(), default=None,
                     help="JSON config; omitted keys take reference values")(f)
    f = click.option("--seed", type=int, default=None, help="master RNG seed")(f)
    f = click.option("--out", type=click.Path(), default=None, help="output directory")(f)
    f = click.option("--no-cache", is_flag=True, help="disable basis/table caches")(f)
    f = click.option("--threads", type=int, default=None, help="BLAS thread cap")(f)
    return f


@click.group()
def main():
    """Electrodynamic Rydberg-atom trap simulator."""


@main.command("solve-field")
@_common
def cmd_solve_field(config, seed, out, no_cache, threads):
    """Solve and cache the electrode basis fields."""
    _execute("solve-field", config, seed, out, no_cache, threads)


@main.command("calibrate")
@_common
def cmd_calibrate(config, seed, out, no_cache, threads):
    """Calibrate the outer-electrode scale eta."""
    _execute("calibrate", config, seed, out, no_cache, threads)


@main.command("frequencies")
@_common
def cmd_frequencies(config, seed, out, no_cache, threads):
    """Secular trap frequencies from small-amplitude trajectories."""
    _execute("frequencies", config, seed, out, no_cache, threads)


@main.command("depth")
@_common
@click.option("--atoms", "n_atoms", type=int, default=200, show_default=True)
@click.option("--probe", "probe_duration", type=float, default=0.2, show_default=True,
              help="probe duration in seconds")
def cmd_depth(config, seed, out, no_cache, threads, n_atoms, probe_duration):
    """Trap depth by retention bisection."""
    _execute("depth", config, seed, out, no_cache, threads,
             n_atoms=n_atoms, probe_duration=probe_duration)


@main.command("lifetime")
@_common
@click.option("--t0-uk", "t0_uk", type=float, default=90.0, show_default=True)
@click.option("--atoms", "n_atoms", type=int, default=40, show_default=True)
def cmd_lifetime(config, seed, out, no_cache, threads, t0_uk, n_atoms):
    """Mean tilt angle and the residual spontaneous-emission lifetime."""
    _execute("lifetime", config, seed, out, no_cache, threads,
             T0=t0_uk * 1e-6, n_atoms=n_atoms)


@main.command("dress-optimize")
@_common
def cmd_dress(config, seed, out, no_cache, threads):
    """Optimize (Omega0, delta0) and tabulate the dressed transition."""
    _execute("dress-optimize", config, seed, out, no_cache, threads)


@main.command("ramsey")
@_common
@click.option("--atoms", "n_atoms", type=int, default=None)
@click.option("--t0-uk", "t0_uk", type=float, default=None)
def cmd_ramsey(config, seed, out, no_cache, threads, n_atoms, t0_uk):
    """Ramsey contrast curve C(t)."""
    over = {}
    doc_patch = {}
    if n_atoms is not None:
        doc_patch.setdefault("ensemble", {})["n_atoms"] = n_atoms
    if t0_uk is not None:
        doc_patch.setdefault("ensemble", {})["T0_uK"] = t0_uk
    _execute_patched("ramsey", config, seed, out, no_cache, threads, doc_patch, **over)


@main.command("echo")
@_common
@click.option("--atoms", "n_atoms", type=int, default=None)
@click.option("--t0-uk", "t0_uk", type=float, default=None)
@click.option("--t-pi", "t_pi", type=float, default=None, help="pi-pulse time (s)")
@click.option("--dispersion", type=float, default=None,
              help="fractional rms of the pi rotation angle")
def cmd_echo(config, seed, out, no_cache, threads, n_atoms, t0_uk, t_pi, dispersion):
    """Spin-echo contrast curve with revival diagnostics."""
    doc_patch = {}
    if n_atoms is not None:
        doc_patch.setdefault("ensemble", {})["n_atoms"] = n_atoms
    if t0_uk is not None:
        doc_patch.setdefault("ensemble", {})["T0_uK"] = t0_uk
    if t_pi is not None:
        doc_patch.setdefault("sequence", {})["t_pi_s"] = t_pi
    if dispersion is not None:
        doc_patch.setdefault("sequence", {})["pulse_dispersion"] = dispersion
    _execute_patched("echo", config, seed, out, no_cache, threads, doc_patch)


@main.command("stern-gerlach")
@_common
@click.option("--duration", type=float, default=0.05, show_default=True)
@click.option("--dressed", is_flag=True, help="use the dressed-branch potentials")
def cmd_sg(config, seed, out, no_cache, threads, duration, dressed):
    """Twin e/g trajectory separation (Stern-Gerlach diagnostic)."""
    _execute("stern-gerlach", config, seed, out, no_cache, threads,
             duration=duration, dressed=dressed)


def _execute_patched(experiment, config, seed, out, no_cache, threads, patch, **over):
    doc = {}
    if config:
        try:
            with open(config) as fh:
                doc = json.load(fh)
        except OSError as ex:
            click.echo(f"i/o error: {ex}", err=True)
            sys.exit(4)
        except json.JSONDecodeError as ex:
            click.echo(f"config error: malformed JSON: {ex}", err=True)
            sys.exit(2)
    for section, kv in patch.items():
        doc.setdefault(section, {}).update(kv)
    import tempfile
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(doc, fh)
        tmp = fh.name
    try:
        _execute(experiment, tmp, seed, out, no_cache, threads, **over)
    finally:
        os.unlink(tmp)


if __name__ == "__main__":
    main()
