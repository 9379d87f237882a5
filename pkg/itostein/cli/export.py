import pathlib
import typing as t

import numpy as np
import typer

from itostein.harness.schemas import GridConfig, IntegrandConfig
from itostein.harness.seeding import split_seed
from itostein.localtime import ops as localtime_ops
from itostein.localtime.schemas import SpaceGrid
from itostein.partitions import ops as partition_ops
from itostein.partitions.schemas import PartitionKind
from itostein.paths.ops import simulate_path
from itostein.utils import parse_mesh

app = typer.Typer()


@app.command(help="Write a partition family as CSV, one partition per row.")
def partitions(
    *,
    output_path: t.Annotated[pathlib.Path, typer.Option(help="Target CSV file.")],
    kind: t.Annotated[PartitionKind, typer.Option(help="Partition family.")] = PartitionKind.uniform,
    depth: t.Annotated[int, typer.Option(help="Number of partitions.")] = 6,
    cap: t.Annotated[float, typer.Option(help="Ratio cap to validate against.")] = partition_ops.DEFAULT_RATIO_CAP,
):
    sequence = partition_ops.make_partition_sequence(kind, depth)
    report = partition_ops.validate_condition_m(sequence, cap=cap)
    partition_ops.write_csv(sequence, output_path)
    typer.echo(f"Ratio constant: {report.ratio_constant:g}")
    typer.echo(f"Finest mesh: {report.mesh_profile[-1]:g}")


@app.command(help="Estimate the local-time field of one path and write it as CSV and .npy.")
def field(
    *,
    output_path: t.Annotated[pathlib.Path, typer.Option(help="Target CSV file; the .npy dump is written next to it.")],
    seed: t.Annotated[int, typer.Option(help="Master seed.")] = 0,
    index: t.Annotated[int, typer.Option(help="Path index.")] = 0,
    mesh: t.Annotated[str, typer.Option(help="Simulation mesh, as 2^-k or a number.")] = "2^-10",
    half_width: t.Annotated[float, typer.Option(help="Levels cover [-half_width, half_width].")] = 3.0,
    spacing: t.Annotated[float, typer.Option(help="Level spacing.")] = 0.01,
    times: t.Annotated[int, typer.Option(help="Number of equally spaced times after 0; the s = 0 row is always written.")] = 16,
):
    grid = GridConfig(n_steps=round(1 / parse_mesh(mesh))).build()
    path = simulate_path(IntegrandConfig().build(), grid, split_seed(seed, index))
    space = SpaceGrid.symmetric(half_width, spacing)
    result = localtime_ops.estimate_local_time_occupation(path, space, np.linspace(0.0, 1.0, times + 1))
    localtime_ops.write_csv(result, output_path)
    localtime_ops.write_binary(result, output_path.with_suffix(".npy"))
    typer.echo(f"Bandwidth: {result.bandwidth:g}")
    typer.echo(f"Max local time: {result.values.max():g}")
