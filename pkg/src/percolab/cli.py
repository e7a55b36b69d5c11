"""Command line interface for :mod:`percolab`."""

import json
import logging
from pathlib import Path
from typing import Any

import click
import yaml

from .config import LabConfig
from .errors import ParameterError, PercolabError
from .experiments import (
    Experiment,
    ExperimentSpec,
    RunManifest,
    get_experiment,
    list_experiments,
    run_experiment,
)
from .tools.benchmark import RunTracker

__all__ = [
    "main",
]


# ═══════════════════════════════════════════════════════════════════
# Top-level group
# ═══════════════════════════════════════════════════════════════════


@click.group()
@click.version_option()
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
@click.pass_context
def main(ctx: click.Context, verbose: bool) -> None:
    r"""Percolab - harmonic functions on percolation clusters, by experiment.

    Catalogue commands::

        percolab list        Registered experiments with their anchors
        percolab show NAME   Parameter defaults of one experiment

    Run commands::

        percolab run NAME --param key=value ...
        percolab NAME --param key=value ...     (one subcommand per experiment)
        percolab summarize DIR                  Flatten runs.jsonl into CSV
    """
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose

    if verbose:
        logging.basicConfig(
            level=logging.DEBUG,
            format="%(asctime)s %(name)s %(levelname)s: %(message)s",
            force=True,
        )
        logging.getLogger("percolab").setLevel(logging.DEBUG)
    else:
        logging.basicConfig(
            level=logging.WARNING,
            format="%(levelname)s: %(message)s",
            force=True,
        )


# ═══════════════════════════════════════════════════════════════════
# Helpers
# ═══════════════════════════════════════════════════════════════════


def _parse_params(items: tuple[str, ...]) -> dict[str, Any]:
    """Turn ``key=value`` strings into a dict; values are read as YAML scalars."""
    params: dict[str, Any] = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ParameterError(f"expected key=value, got {item!r}")
        try:
            params[key.strip().replace("-", "_")] = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ParameterError(f"cannot parse value of {key!r}: {exc}") from exc
    return params


def _print_manifest(manifest: RunManifest) -> None:
    """Pretty-print assertions, observations and outputs of a run."""
    click.echo(f"\n{'═' * 60}")
    click.echo(f"  {manifest.experiment}  seed={manifest.seed}  {manifest.wall_time_s:.1f}s")
    for name, ok in manifest.assertions.items():
        click.echo(f"    {'PASS' if ok else 'FAIL'}  {name}")
    for name, value in manifest.observations.items():
        click.echo(f"    obs   {name}: {value}")
    for label, path in manifest.outputs.items():
        click.echo(f"    out   {label}: {path}")
    click.echo(f"{'═' * 60}")


def _execute(
    ctx: click.Context,
    name: str,
    params: tuple[str, ...],
    config_path: str | None,
    output_dir: str | None,
    seed: int | None,
) -> None:
    """Shared body of ``run`` and the per-experiment subcommands."""
    try:
        config = LabConfig.load(config_path)
        spec = ExperimentSpec(
            name=name,
            params=_parse_params(params),
            output_dir=Path(output_dir) if output_dir else config.output_dir,
            seed=seed,
        )
        manifest = run_experiment(spec, config, progress=ctx.obj.get("verbose", False))
    except (PercolabError, FileNotFoundError) as exc:
        click.echo(f"Error: {exc}", err=True)
        raise click.Abort()
    _print_manifest(manifest)
    if not manifest.passed:
        failed = [k for k, ok in manifest.assertions.items() if not ok]
        click.echo(f"Failed assertions: {', '.join(failed)}", err=True)
        ctx.exit(1)


# ── Shared option decorators ─────────────────────────────────────


def _run_options(fn: Any) -> Any:
    """Options shared by ``run`` and the per-experiment subcommands."""
    fn = click.option(
        "--param",
        "-p",
        "params",
        multiple=True,
        metavar="KEY=VALUE",
        help="Override one parameter; repeatable. Values are YAML scalars or lists.",
    )(fn)
    fn = click.option(
        "--config",
        "config_path",
        type=click.Path(dir_okay=False),
        default=None,
        help="YAML configuration file (default: $PERCOLAB_CONFIG).",
    )(fn)
    fn = click.option(
        "--output-dir",
        default=None,
        help="Root directory for results; each experiment writes a subdirectory.",
    )(fn)
    fn = click.option(
        "--seed",
        type=click.IntRange(0, 2**64 - 1),
        default=None,
        help="Top-level seed (overrides the configuration).",
    )(fn)
    return fn


# ═══════════════════════════════════════════════════════════════════
# Catalogue
# ═══════════════════════════════════════════════════════════════════


@main.command("list")
@click.option("--json", "as_json", is_flag=True, help="Print the catalogue as JSON.")
def cmd_list(as_json: bool) -> None:
    """List registered experiments."""
    items = list_experiments()
    if as_json:
        click.echo(json.dumps([{"name": e.name, "anchor": e.anchor} for e in items], indent=2))
        return
    width = max(len(e.name) for e in items)
    for e in items:
        click.echo(f"{e.name:{width}s}  {e.anchor}")


@main.command("show")
@click.argument("name")
def cmd_show(name: str) -> None:
    """Show the parameter defaults of experiment NAME."""
    try:
        exp = get_experiment(name)
    except PercolabError as exc:
        click.echo(f"Error: {exc}", err=True)
        raise click.Abort()
    defaults = exp.params().model_dump(mode="json")
    click.echo(f"# {exp.name}: {exp.anchor}")
    click.echo(yaml.safe_dump({exp.name: defaults}, sort_keys=False).rstrip())


# ═══════════════════════════════════════════════════════════════════
# Running
# ═══════════════════════════════════════════════════════════════════


@main.command("run")
@click.argument("name")
@_run_options
@click.pass_context
def cmd_run(
    ctx: click.Context,
    name: str,
    params: tuple[str, ...],
    config_path: str | None,
    output_dir: str | None,
    seed: int | None,
) -> None:
    """Run experiment NAME; exit status 1 when an embedded assertion fails."""
    _execute(ctx, name, params, config_path, output_dir, seed)


@main.command("summarize")
@click.argument("directory", type=click.Path(file_okay=False, exists=True))
def cmd_summarize(directory: str) -> None:
    """Flatten the runs.jsonl of DIRECTORY into runs_summary.csv."""
    path = RunTracker(Path(directory)).write_summary_csv()
    click.echo(str(path))


def _experiment_command(exp: Experiment) -> click.Command:
    @_run_options
    @click.pass_context
    def command(
        ctx: click.Context,
        params: tuple[str, ...],
        config_path: str | None,
        output_dir: str | None,
        seed: int | None,
    ) -> None:
        _execute(ctx, exp.name, params, config_path, output_dir, seed)

    command.__doc__ = f"{exp.summary or exp.anchor}"
    return click.command(exp.name, short_help=exp.anchor[:60])(command)


for _exp in list_experiments():
    main.add_command(_experiment_command(_exp))


if __name__ == "__main__":
    main()
