import pathlib
import typing as t

import numpy as np

from itostein.common import DEFAULT_MESH_TOLERANCE
from itostein.errors import MeshNotVanishing, RatioUnbounded
from itostein.partitions.schemas import Partition, PartitionKind, PartitionSequence, ValidationReport
from itostein.utils import read_rows, write_rows

DEFAULT_RATIO_CAP = 4.0


def uniform_partition(level: int) -> Partition:
    return Partition(points=np.linspace(0.0, 1.0, 2**level + 1))


def geometric_dyadic_partition(level: int) -> Partition:
    """Skeleton {0} U {2^(i-level)}, with every dyadic block [a, 2a] cut into 2^(level-1) equal pieces."""
    blocks = [np.linspace(2.0 ** (i - level), 2.0 ** (i - level + 1), 2 ** (level - 1) + 1) for i in range(level)]
    return Partition(points=np.unique(np.concatenate([[0.0], *blocks])))


_BUILDERS: t.Dict[PartitionKind, t.Callable[[int], Partition]] = {
    PartitionKind.uniform: uniform_partition,
    PartitionKind.geometric_dyadic: geometric_dyadic_partition,
}


def make_partition_sequence(kind: PartitionKind, depth: int) -> PartitionSequence:
    if depth < 1:
        raise ValueError(f"Depth must be at least 1, got {depth}.")
    if kind not in _BUILDERS:
        raise ValueError(f"Partitions of kind {kind.value} are built from explicit points, see custom_sequence.")
    build = _BUILDERS[kind]
    return PartitionSequence(family=[build(level) for level in range(1, depth + 1)], kind=kind)


def custom_sequence(family: t.Sequence[t.Sequence[float]]) -> PartitionSequence:
    return PartitionSequence(family=[Partition(points=points) for points in family], kind=PartitionKind.custom)


def bisect(partition: Partition) -> Partition:
    midpoints = 0.5 * (partition.points[1:] + partition.points[:-1])
    return Partition(points=np.sort(np.concatenate([partition.points, midpoints])))


def refine(sequence: PartitionSequence) -> PartitionSequence:
    """Append the bisection of the finest partition."""
    return PartitionSequence(family=[*sequence.family, bisect(sequence.finest)], kind=sequence.kind)


def validate_condition_m(
    sequence: PartitionSequence,
    cap: float = DEFAULT_RATIO_CAP,
    mesh_tolerance: float = DEFAULT_MESH_TOLERANCE,
) -> ValidationReport:
    """Check the ratio bound and the vanishing mesh of a partition family.

    The ratio constant is the largest t_{i+1} / t_i over every partition; the family fails with
    RatioUnbounded when it exceeds ``cap``. The mesh profile must be nonincreasing and either strictly
    decreasing or end below ``mesh_tolerance``.
    """
    if sequence.ratio_constant > cap:
        raise RatioUnbounded(f"Ratio constant {sequence.ratio_constant:g} exceeds the cap {cap:g}.")

    profile = sequence.mesh_profile
    steps = np.diff(profile)
    vanishing = bool(np.all(steps <= 0) and (np.all(steps < 0) or profile[-1] <= mesh_tolerance))
    if not vanishing:
        raise MeshNotVanishing(f"Mesh profile {profile.tolist()} does not vanish.")

    return ValidationReport(
        kind=sequence.kind,
        ratio_constant=sequence.ratio_constant,
        cap=cap,
        mesh_profile=profile,
        mesh_tolerance=mesh_tolerance,
        mesh_vanishing=vanishing,
    )


def write_csv(sequence: PartitionSequence, destination: pathlib.Path):
    """One row per partition: its level followed by its points."""
    write_rows(
        destination,
        ["level", "points"],
        ([level, *partition.points.tolist()] for level, partition in enumerate(sequence.family, start=1)),
    )


def read_csv(source: pathlib.Path, kind: PartitionKind = PartitionKind.custom) -> PartitionSequence:
    _, rows = read_rows(source)
    return PartitionSequence(family=[Partition(points=[float(v) for v in row[1:]]) for row in rows], kind=kind)
