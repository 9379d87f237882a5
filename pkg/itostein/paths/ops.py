import logging
import pathlib
import typing as t

import numpy as np

from itostein.errors import BoundViolation, DegenerateTime, EmptySample, NonpositiveRho
from itostein.harness.seeding import split_seed
from itostein.paths.schemas import DensityEstimate, IntegrandSpec, SamplePath, TimeGrid
from itostein.utils import write_rows

logger = logging.getLogger(__name__)

# Relative slack when asserting rho <= |u| <= upper.
BOUND_SLACK = 1e-12

_BINARY_HEADER = np.dtype("<u8")
_BINARY_BODY = np.dtype("<f8")


def generator(seed: int) -> np.random.Generator:
    """Counter-based stream keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed))


def brownian_increments(grid: TimeGrid, seed: int) -> np.ndarray:
    return generator(seed).standard_normal(grid.n_steps) * np.sqrt(grid.steps)


def simulate_path(spec: IntegrandSpec, grid: TimeGrid, seed: int) -> SamplePath:
    """Simulate W and X = int u dW on ``grid`` with the left-endpoint Euler rule."""
    if spec.rho <= 0:
        raise NonpositiveRho(f"Lower bound must be positive, got {spec.rho}.")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"Seed must be a 64-bit unsigned integer, got {seed}.")

    dw = brownian_increments(grid, seed)
    w = np.concatenate(([0.0], np.cumsum(dw)))
    u = spec.evaluate(grid.points, w)

    magnitude = np.abs(u)
    if np.any(magnitude < spec.rho * (1 - BOUND_SLACK)) or np.any(magnitude > spec.upper * (1 + BOUND_SLACK)):
        raise BoundViolation(
            f"Integrand {spec.name} left [{spec.rho}, {spec.upper}]: |u| ranged over [{magnitude.min()}, {magnitude.max()}]."
        )

    x = np.concatenate(([0.0], np.cumsum(u[:-1] * np.diff(w))))
    return SamplePath(grid=grid, w=w, u=u, x=x, qv_increments=u[:-1] ** 2 * grid.steps, seed=seed)


def simulate_paths(spec: IntegrandSpec, grid: TimeGrid, master_seed: int, indices: t.Iterable[int]) -> t.Iterator[SamplePath]:
    for index in indices:
        yield simulate_path(spec, grid, split_seed(master_seed, index))


def density_from_samples(values: np.ndarray, time: float, bins: int) -> DensityEstimate:
    """Histogram density of X_t samples over +-4 sample standard deviations."""
    if time <= 0:
        raise DegenerateTime(f"Density bound needs t > 0, got {time}.")
    if len(values) == 0:
        raise EmptySample("No samples to estimate a density from.")
    spread = 4.0 * float(np.std(values))
    if spread == 0.0:
        spread = 1.0
    counts, edges = np.histogram(values, bins=bins, range=(-spread, spread))
    density = counts / (len(values) * np.diff(edges))
    max_density = float(np.max(density))
    return DensityEstimate(
        t=time,
        n_paths=len(values),
        edges=edges,
        density=density,
        max_density=max_density,
        scaled_peak=max_density * float(np.sqrt(time)),
    )


def empirical_density_bound(
    spec: IntegrandSpec,
    time: float,
    n_paths: int,
    bins: int = 40,
    grid: t.Optional[TimeGrid] = None,
    master_seed: int = 0,
) -> DensityEstimate:
    if time <= 0:
        raise DegenerateTime(f"Density bound needs t > 0, got {time}.")
    if n_paths <= 0:
        raise EmptySample("At least one path is required.")
    grid = grid or TimeGrid.uniform(1000)
    index = grid.left_index(time)
    values = np.array([path.x[index] for path in simulate_paths(spec, grid, master_seed, range(n_paths))])
    return density_from_samples(values, time, bins)


def write_csv(path: SamplePath, destination: pathlib.Path):
    write_rows(destination, ["t", "w", "u", "x"], zip(path.times, path.w, path.u, path.x))


def write_binary(path: SamplePath, spec: IntegrandSpec, destination: pathlib.Path):
    destination = pathlib.Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([len(path.times), path.seed, spec.spec_id], dtype=np.uint64).astype(_BINARY_HEADER)
    body = np.concatenate([path.times, path.w, path.u, path.x]).astype(_BINARY_BODY)
    destination.write_bytes(header.tobytes() + body.tobytes())


def read_binary(source: pathlib.Path) -> t.Tuple[SamplePath, int]:
    """Read a binary path dump, returning the path and the integrand kind id stored with it."""
    raw = pathlib.Path(source).read_bytes()
    n_points, seed, spec_id = (int(v) for v in np.frombuffer(raw, dtype=_BINARY_HEADER, count=3))
    body = np.frombuffer(raw, dtype=_BINARY_BODY, offset=3 * _BINARY_HEADER.itemsize).reshape(4, n_points)
    times, w, u, x = (np.array(column, dtype=float) for column in body)
    grid = TimeGrid(points=times)
    return SamplePath(grid=grid, w=w, u=u, x=x, qv_increments=u[:-1] ** 2 * grid.steps, seed=seed), spec_id
