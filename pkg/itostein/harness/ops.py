import concurrent.futures
import itertools
import logging
import pathlib
import typing as t

import numpy as np

from itostein.errors import EmptySample, ExperimentError, ItosteinError
from itostein.harness.experiments import EXPERIMENTS, Record
from itostein.harness.schemas import ExperimentConfig, ExperimentResult, MeshSweep
from itostein.harness.seeding import split_seeds
from itostein.ito.ops import decreasing_with_one_inversion
from itostein.paths.ops import simulate_path
from itostein.utils import write_rows

logger = logging.getLogger(__name__)

SUMMARY_HEADER = ["experiment", "kind", "mesh", "n_paths", "mean", "stderr", "ci_low", "ci_high", "max", "passed"]


def records_for(config: ExperimentConfig, indices: t.Sequence[int]) -> t.List[Record]:
    """Simulate the given path indices and turn each path into a record."""
    experiment = EXPERIMENTS[config.kind]
    state = experiment.prepare(config)
    spec, grid = config.integrand.build(), config.grid.build()
    records = []
    for index, seed in zip(indices, split_seeds(config.master_seed, indices)):
        path = simulate_path(spec, grid, int(seed))
        try:
            records.append(experiment.record(config, state, path))
        except ItosteinError as e:
            raise ExperimentError(config.kind.value, int(index), e) from e
    return records


def chunk_indices(n_paths: int, workers: int) -> t.List[t.List[int]]:
    chunks = np.array_split(np.arange(n_paths), max(1, min(n_paths, 4 * workers)))
    return [chunk.tolist() for chunk in chunks if len(chunk)]


def collect_records(config: ExperimentConfig) -> t.List[Record]:
    """Records of every path, in path-index order whatever the number of workers."""
    if config.n_paths == 0:
        raise EmptySample("An experiment needs at least one path.")
    chunks = chunk_indices(config.n_paths, config.workers)
    if config.workers == 1:
        return records_for(config, range(config.n_paths))
    with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as executor:
        results = executor.map(records_for, itertools.repeat(config), chunks)
        return [record for chunk in results for record in chunk]


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    logger.info("Running %s (%s) on %d paths with %d workers.", config.name, config.kind.value, config.n_paths, config.workers)
    records = collect_records(config)
    result = EXPERIMENTS[config.kind].summarize(config, records)
    logger.info("%s: mean %.6g, stderr %.3g, passed %s.", config.name, result.summary.mean, result.summary.stderr, result.passed)
    if config.output_dir is not None:
        write_outputs(result, config.output_dir)
    return result


def run_mesh_sweep(config: ExperimentConfig, n_steps: t.Sequence[int]) -> MeshSweep:
    """The same experiment on grids of increasing size; |mean| must shrink along them, allowing one inversion."""
    n_steps = sorted(n_steps)
    results = []
    for steps in n_steps:
        output_dir = config.output_dir / f"n_steps_{steps}" if config.output_dir is not None else None
        results.append(run_experiment(config.with_overrides(n_steps=steps, output_dir=output_dir)))
    decreasing = decreasing_with_one_inversion([abs(r.summary.mean) for r in results])
    logger.info("%s over %s steps: decreasing %s.", config.name, n_steps, decreasing)
    return MeshSweep(results=results, decreasing=decreasing)


def write_outputs(result: ExperimentResult, output_dir: pathlib.Path):
    """summary.csv, report.json and, for residual experiments, the per-path residual breakdown."""
    output_dir = pathlib.Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    config, summary = result.config, result.summary
    write_rows(
        output_dir / "summary.csv",
        SUMMARY_HEADER,
        [
            [
                config.name,
                config.kind.value,
                config.grid.build().mesh,
                config.n_paths,
                summary.mean,
                summary.stderr,
                summary.ci_low,
                summary.ci_high,
                summary.max,
                int(result.passed),
            ]
        ],
    )
    (output_dir / "report.json").write_text(result.model_dump_json(indent=2))
    if result.report is not None:
        result.report.write_csv(output_dir / "residuals.csv")
