import logging
import pathlib
import typing as t

import typer

from itostein.cli import export
from itostein.errors import ConfigInvalid, ItosteinError
from itostein.harness.ops import run_experiment, run_mesh_sweep
from itostein.harness.schemas import ExperimentConfig, ExperimentKind, ExperimentResult, GridConfig, IntegrandConfig
from itostein.harness.seeding import split_seed
from itostein.ito.schemas import ResidualForm
from itostein.paths import ops as path_ops
from itostein.utils import parse_mesh

app = typer.Typer()
app.add_typer(export.app, name="export", help="Export partitions and local-time fields.")

ConfigPath = t.Annotated[t.Optional[pathlib.Path], typer.Option("--config", help="YAML experiment configuration.")]
Paths = t.Annotated[t.Optional[int], typer.Option("--paths", help="Number of Monte-Carlo paths.")]
Seed = t.Annotated[t.Optional[int], typer.Option("--seed", help="Master seed every path seed is derived from.")]
Mesh = t.Annotated[t.Optional[str], typer.Option("--mesh", help="Simulation mesh, as 2^-k or a number.")]
Out = t.Annotated[t.Optional[pathlib.Path], typer.Option("--out", help="Directory to write summary.csv and report.json into.")]
Workers = t.Annotated[t.Optional[int], typer.Option("--workers", help="Worker processes; results do not depend on it.")]
Tolerance = t.Annotated[t.Optional[float], typer.Option("--tolerance", help="Pass/fail tolerance of the experiment.")]
Verbose = t.Annotated[bool, typer.Option("--verbose", help="Log progress to stderr.")]
Function = t.Annotated[t.Optional[str], typer.Option("--function", help="Catalog function to check.")]

DEFAULT_SWEEP_MESHES = ["1e-2", "1e-3", "1e-4"]


def _configure_logging(verbose: bool):
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


def _load(
    kind: t.Optional[ExperimentKind], config: t.Optional[pathlib.Path], mesh: t.Optional[str], **overrides
) -> ExperimentConfig:
    if config is not None:
        base = ExperimentConfig.parse_yaml(config)
    elif kind is not None:
        base = ExperimentConfig.validated({"kind": kind})
    else:
        raise ConfigInvalid("Either a configuration file or an experiment command is required.")
    if kind is not None and base.kind != kind:
        raise ConfigInvalid(f"Configuration describes a {base.kind.value} experiment, not {kind.value}.")
    n_steps = round(1 / parse_mesh(mesh)) if mesh is not None else None
    return base.with_overrides(n_steps=n_steps, **overrides)


def _echo(result: ExperimentResult):
    summary = result.summary
    typer.echo(
        f"{result.config.name}: n={summary.n} mean={summary.mean:.6g} stderr={summary.stderr:.3g} "
        f"ci95=[{summary.ci_low:.6g}, {summary.ci_high:.6g}] passed={result.passed}"
    )
    for key, value in result.details.items():
        typer.echo(f"  {key}: {value}")


def _execute(kind: t.Optional[ExperimentKind], config, paths, seed, mesh, out, workers, tolerance, verbose, **extra):
    _configure_logging(verbose)
    try:
        resolved = _load(
            kind,
            config,
            mesh,
            n_paths=paths,
            master_seed=seed,
            output_dir=out,
            workers=workers,
            tolerance=tolerance,
            **extra,
        )
        result = run_experiment(resolved)
    except (ItosteinError, ValueError) as e:
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(code=2)
    _echo(result)
    raise typer.Exit(code=0 if result.passed else 1)


@app.command(help="Run the experiment described by a configuration file.")
def run(
    *,
    config: t.Annotated[pathlib.Path, typer.Option("--config", help="YAML experiment configuration.")],
    paths: Paths = None,
    seed: Seed = None,
    mesh: Mesh = None,
    out: Out = None,
    workers: Workers = None,
    tolerance: Tolerance = None,
    verbose: Verbose = False,
):
    _execute(None, config, paths, seed, mesh, out, workers, tolerance, verbose)


@app.command(help="Check the density bound p_t(x) <= C / sqrt(t) of the simulated martingale.")
def density(
    *,
    config: ConfigPath = None,
    paths: Paths = None,
    seed: Seed = None,
    mesh: Mesh = None,
    out: Out = None,
    workers: Workers = None,
    tolerance: Tolerance = None,
    verbose: Verbose = False,
    bins: t.Annotated[t.Optional[int], typer.Option(help="Histogram bins.")] = None,
):
    _execute(ExperimentKind.density_bound, config, paths, seed, mesh, out, workers, tolerance, verbose, bins=bins)


@app.command(help="Compare the mean occupation-density local time with its closed form and the Tanaka estimate.")
def localtime(
    *,
    config: ConfigPath = None,
    paths: Paths = None,
    seed: Seed = None,
    mesh: Mesh = None,
    out: Out = None,
    workers: Workers = None,
    tolerance: Tolerance = None,
    verbose: Verbose = False,
    level: t.Annotated[t.Optional[float], typer.Option(help="Space level of the local time.")] = None,
):
    _execute(ExperimentKind.local_time_mean, config, paths, seed, mesh, out, workers, tolerance, verbose, level=level)


@app.command(help="Compare the integral of sign(x) against local time with minus the covariation [sign(X), X].")
def integrate(
    *,
    config: ConfigPath = None,
    paths: Paths = None,
    seed: Seed = None,
    mesh: Mesh = None,
    out: Out = None,
    workers: Workers = None,
    tolerance: Tolerance = None,
    verbose: Verbose = False,
):
    _execute(ExperimentKind.bouleau_yor, config, paths, seed, mesh, out, workers, tolerance, verbose)


@app.command(help="Check that quadratic covariations agree across partition families.")
def covariation(
    *,
    config: ConfigPath = None,
    paths: Paths = None,
    seed: Seed = None,
    mesh: Mesh = None,
    out: Out = None,
    workers: Workers = None,
    tolerance: Tolerance = None,
    verbose: Verbose = False,
    depth: t.Annotated[t.Optional[int], typer.Option(help="Depth of the partition families.")] = None,
):
    _execute(ExperimentKind.covariation_partitions, config, paths, seed, mesh, out, workers, tolerance, verbose, depth=depth)


@app.command("verify-ito", help="Monte-Carlo residual of the extended Itô formula for a catalog function.")
def verify_ito(
    *,
    config: ConfigPath = None,
    paths: Paths = None,
    seed: Seed = None,
    mesh: Mesh = None,
    out: Out = None,
    workers: Workers = None,
    tolerance: Tolerance = None,
    verbose: Verbose = False,
    function: Function = None,
    form: t.Annotated[t.Optional[ResidualForm], typer.Option(help="Local-time or covariation form.")] = None,
    eps: t.Annotated[t.Optional[float], typer.Option(help="Start time; 0 extends the integral to eps -> 0.")] = None,
):
    _execute(
        ExperimentKind.ito_residual,
        config,
        paths,
        seed,
        mesh,
        out,
        workers,
        tolerance,
        verbose,
        function=function,
        form=form,
        eps=eps,
    )


@app.command("sweep-ito", help="Residual of the extended Itô formula on several meshes; |mean| must shrink with the mesh.")
def sweep_ito(
    *,
    config: ConfigPath = None,
    paths: Paths = None,
    seed: Seed = None,
    meshes: t.Annotated[t.Optional[t.List[str]], typer.Option("--mesh", help="Simulation meshes, as 2^-k or numbers.")] = None,
    out: Out = None,
    workers: Workers = None,
    tolerance: Tolerance = None,
    verbose: Verbose = False,
    function: Function = None,
):
    _configure_logging(verbose)
    try:
        resolved = _load(
            ExperimentKind.ito_residual,
            config,
            None,
            n_paths=paths,
            master_seed=seed,
            output_dir=out,
            workers=workers,
            tolerance=tolerance,
            function=function,
        )
        n_steps = [round(1 / parse_mesh(mesh)) for mesh in meshes or DEFAULT_SWEEP_MESHES]
        sweep = run_mesh_sweep(resolved, n_steps)
    except (ItosteinError, ValueError) as e:
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(code=2)
    for result in sweep.results:
        typer.echo(f"[{result.config.grid.n_steps} steps]")
        _echo(result)
    typer.echo(f"decreasing={sweep.decreasing} passed={sweep.passed}")
    raise typer.Exit(code=0 if sweep.passed else 1)


@app.command("verify-chain", help="Compare the classical Itô terms of mollified functions with the extended formula.")
def verify_chain(
    *,
    config: ConfigPath = None,
    paths: Paths = None,
    seed: Seed = None,
    mesh: Mesh = None,
    out: Out = None,
    workers: Workers = None,
    tolerance: Tolerance = None,
    verbose: Verbose = False,
    function: Function = None,
    orders: t.Annotated[t.Optional[t.List[int]], typer.Option("--order", help="Kernel orders n.")] = None,
):
    _execute(
        ExperimentKind.smooth_chain,
        config,
        paths,
        seed,
        mesh,
        out,
        workers,
        tolerance,
        verbose,
        function=function,
        kernel_orders=orders or None,
    )


@app.command("norm-bound", help="Regress E|integral of f| against the norm of f over random elementary functions.")
def norm_bound(
    *,
    config: ConfigPath = None,
    paths: Paths = None,
    seed: Seed = None,
    mesh: Mesh = None,
    out: Out = None,
    workers: Workers = None,
    tolerance: Tolerance = None,
    verbose: Verbose = False,
):
    _execute(ExperimentKind.norm_bound, config, paths, seed, mesh, out, workers, tolerance, verbose)


@app.command(help="Simulate sample paths and write them as CSV and binary dumps.")
def simulate(
    *,
    out: t.Annotated[pathlib.Path, typer.Option("--out", help="Directory to write the paths into.")],
    config: ConfigPath = None,
    paths: t.Annotated[int, typer.Option("--paths", help="Number of paths.")] = 1,
    seed: t.Annotated[int, typer.Option("--seed", help="Master seed.")] = 0,
    mesh: Mesh = None,
    verbose: Verbose = False,
):
    _configure_logging(verbose)
    try:
        integrand, grid_config = IntegrandConfig(), GridConfig()
        if config is not None:
            loaded = ExperimentConfig.parse_yaml(config)
            integrand, grid_config = loaded.integrand, loaded.grid
        if mesh is not None:
            grid_config = grid_config.model_copy(update={"n_steps": round(1 / parse_mesh(mesh))})
        spec, grid = integrand.build(), grid_config.build()
        for index in range(paths):
            path = path_ops.simulate_path(spec, grid, split_seed(seed, index))
            path_ops.write_csv(path, out / f"path_{index:05d}.csv")
            path_ops.write_binary(path, spec, out / f"path_{index:05d}.bin")
    except (ItosteinError, ValueError) as e:
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(code=2)
    typer.echo(f"Wrote {paths} paths of {grid.n_steps} steps to {out}.")
