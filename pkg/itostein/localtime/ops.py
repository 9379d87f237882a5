import pathlib
import typing as t

import numpy as np

from itostein.errors import BandwidthTooSmall, EmptyTimes
from itostein.localtime.schemas import LocalTimeField, SpaceGrid
from itostein.paths.schemas import SamplePath
from itostein.utils import write_rows


def default_bandwidth(mesh: float, spacing: float) -> float:
    return max(spacing, float(np.sqrt(mesh)))


def estimate_local_time_occupation(
    path: SamplePath,
    space: SpaceGrid,
    times: t.Sequence[float],
    bandwidth: t.Optional[float] = None,
) -> LocalTimeField:
    """Occupation-density estimate (1 / 2 eps) * sum over t_i < s of 1{|x_i - level| < eps} * u_i^2 * dt_i.

    Every step adds its quadratic-variation increment to the levels within ``bandwidth`` of its left
    endpoint, then the per-slot contributions accumulate along the requested times. Levels never visited
    within ``bandwidth`` stay exactly 0.
    """
    times = np.asarray(times, dtype=float)
    if len(times) == 0:
        raise EmptyTimes("At least one time is required.")
    if np.any(np.diff(times) <= 0):
        raise ValueError("Times must be strictly increasing.")
    if bandwidth is None:
        bandwidth = default_bandwidth(path.grid.mesh, space.spacing)
    if bandwidth <= 0 or bandwidth < space.spacing / 2:
        raise BandwidthTooSmall(f"Bandwidth {bandwidth:g} is below half the level spacing {space.spacing:g}.")

    levels = space.levels
    x = path.x[:-1]
    lo = np.searchsorted(levels, x - bandwidth, side="right")
    hi = np.searchsorted(levels, x + bandwidth, side="left")
    # Slot of a step: the first requested time strictly after its left endpoint.
    slot = np.searchsorted(times, path.grid.points[:-1], side="right")
    keep = (slot < len(times)) & (hi > lo)
    lo, hi, slot, q = lo[keep], hi[keep], slot[keep], path.qv_increments[keep]

    n_levels = len(levels)
    rows = np.zeros(len(times) * n_levels)
    width = int(np.max(hi - lo)) if len(lo) else 0
    for offset in range(width):
        level = lo + offset
        inside = level < hi
        rows += np.bincount(slot[inside] * n_levels + level[inside], weights=q[inside], minlength=len(rows))

    values = np.cumsum(rows.reshape(len(times), n_levels), axis=0) / (2.0 * bandwidth)
    return LocalTimeField(space=space, times=times, values=values, bandwidth=bandwidth, seed=path.seed)


def estimate_local_time_tanaka(path: SamplePath, level: float, time: float) -> float:
    """|X_t - a| - |a| - sum sign(x_i - a) * dx_i over the steps before ``time``."""
    index = path.grid.index_of(time)
    x = path.x[: index + 1]
    signs = np.sign(x[:-1] - level)
    return float(abs(x[-1] - level) - abs(level) - np.sum(signs * np.diff(x)))


def occupation_integral(field: LocalTimeField, g: t.Callable[[np.ndarray], np.ndarray], time_index: int = -1) -> float:
    """Sum over levels of g(level) * L[time][level] * cell width."""
    levels = field.space.levels
    return float(np.sum(g(levels) * field.values[time_index] * field.space.cell_weights))


def path_occupation_integral(path: SamplePath, g: t.Callable[[np.ndarray], np.ndarray], time: float) -> float:
    """Sum of g(x_i) * u_i^2 * dt_i over the steps before ``time``."""
    index = path.grid.index_of(time)
    return float(np.sum(g(path.x[:index]) * path.qv_increments[:index]))


def write_csv(field: LocalTimeField, destination: pathlib.Path):
    """Header of levels, then one row per time starting with the time."""
    write_rows(
        destination,
        ["time", *field.space.levels.tolist()],
        ([time, *row.tolist()] for time, row in zip(field.times, field.values)),
    )


def write_binary(field: LocalTimeField, destination: pathlib.Path):
    destination = pathlib.Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    np.save(destination, field.values)
