import functools
import typing as t

import pytest

from itostein.paths.ops import simulate_paths
from itostein.paths.schemas import IntegrandSpec, SamplePath, TimeGrid

# Batches up to this many simulated steps are kept in memory across tests.
CACHED_STEPS = 10**6


def _spec(kind: str) -> IntegrandSpec:
    return IntegrandSpec.constant(1.0) if kind == "brownian" else IntegrandSpec.bounded_sine(1.0, 1.0)


@functools.lru_cache(maxsize=None)
def _cached(kind: str, n_steps: int, n_paths: int, master_seed: int) -> t.Tuple[SamplePath, ...]:
    return tuple(simulate_paths(_spec(kind), TimeGrid.uniform(n_steps), master_seed, range(n_paths)))


@pytest.fixture(scope="session")
def sample_paths() -> t.Callable[..., t.Iterable[SamplePath]]:
    """Path batches of kind "brownian" (u = 1) or "sine" (u = 1 + (1 + sin W) / 2).

    Small batches come back as cached tuples; larger ones are streamed and can be iterated once.
    """

    def make(kind: str, n_steps: int, n_paths: int, master_seed: int = 0) -> t.Iterable[SamplePath]:
        if n_steps * n_paths <= CACHED_STEPS:
            return _cached(kind, n_steps, n_paths, master_seed)
        return simulate_paths(_spec(kind), TimeGrid.uniform(n_steps), master_seed, range(n_paths))

    return make
