import numpy as np
import pytest

from itostein.common import SQRT_2_OVER_PI
from itostein.errors import BandwidthTooSmall, EmptyTimes, GridMismatch, OffGridTime
from itostein.localtime.ops import (
    default_bandwidth,
    estimate_local_time_occupation,
    estimate_local_time_tanaka,
    occupation_integral,
    path_occupation_integral,
    write_binary,
    write_csv,
)
from itostein.localtime.schemas import SpaceGrid
from itostein.paths.ops import simulate_path
from itostein.paths.schemas import IntegrandSpec, TimeGrid
from itostein.utils import read_rows

NEAR_ZERO = SpaceGrid(levels=np.linspace(-0.1, 0.1, 21))


@pytest.fixture(scope="module")
def path():
    return simulate_path(IntegrandSpec.constant(1.0), TimeGrid.uniform(2000), seed=11)


def test_symmetric_grid():
    space = SpaceGrid.symmetric(1.0, 0.25)
    np.testing.assert_allclose(space.levels, [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0])
    assert space.spacing == pytest.approx(0.25)
    assert np.sum(space.cell_weights) == pytest.approx(2.0)


def test_default_bandwidth():
    assert default_bandwidth(1e-4, 0.001) == pytest.approx(0.01)
    assert default_bandwidth(1e-4, 0.05) == 0.05


def test_field_is_nonnegative_and_nondecreasing(path):
    field = estimate_local_time_occupation(path, SpaceGrid.symmetric(4.0, 0.02), np.linspace(0.0, 1.0, 11))
    assert field.values.shape == (11, 401)
    assert np.all(field.values >= 0)
    assert np.all(np.diff(field.values, axis=0) >= 0)
    np.testing.assert_array_equal(field.values[0], 0.0)


def test_levels_never_visited_are_exactly_zero(path):
    bandwidth = 0.05
    space = SpaceGrid.symmetric(6.0, 0.05)
    field = estimate_local_time_occupation(path, space, [0.5, 1.0], bandwidth)
    far = (space.levels > path.x.max() + bandwidth) | (space.levels < path.x.min() - bandwidth)
    assert far.any()
    assert np.all(field.values[:, far] == 0.0)


def test_field_lookup(path):
    field = estimate_local_time_occupation(path, NEAR_ZERO, [0.5, 1.0], 0.02)
    assert field.at(0.0, 1.0) == field.values[1, 10]
    with pytest.raises(GridMismatch):
        field.at(0.005, 1.0)
    with pytest.raises(GridMismatch):
        field.at(0.0, 0.75)


def test_mean_local_time_at_zero(sample_paths):
    estimates = [
        estimate_local_time_occupation(p, NEAR_ZERO, [1.0], 0.02).at(0.0, 1.0) for p in sample_paths("brownian", 1000, 6000)
    ]
    assert np.mean(estimates) == pytest.approx(SQRT_2_OVER_PI, rel=0.05)


def test_occupation_and_tanaka_estimates_agree(sample_paths):
    occupation, tanaka = [], []
    for p in sample_paths("brownian", 4000, 1000):
        occupation.append(estimate_local_time_occupation(p, NEAR_ZERO, [1.0], 0.01).at(0.0, 1.0))
        tanaka.append(estimate_local_time_tanaka(p, 0.0, 1.0))
    assert np.corrcoef(occupation, tanaka)[0, 1] > 0.9
    assert np.mean(occupation) == pytest.approx(np.mean(tanaka), rel=0.05)


@pytest.mark.parametrize("seed", range(5))
def test_occupation_times_formula(seed):
    path = simulate_path(IntegrandSpec.bounded_sine(1.0, 1.0), TimeGrid.uniform(10000), seed=seed)
    field = estimate_local_time_occupation(path, SpaceGrid.symmetric(10.0, 0.01), [1.0], 0.01)

    def g(x):
        return np.exp(-(x**2))

    lhs = occupation_integral(field, g)
    rhs = path_occupation_integral(path, g, 1.0)
    assert abs(lhs - rhs) / (1 + abs(rhs)) <= 0.03
    total = occupation_integral(field, np.ones_like)
    assert total == pytest.approx(np.sum(path.qv_increments), rel=1e-2)


def test_tanaka_edge_cases(path):
    assert estimate_local_time_tanaka(path, 0.0, 0.0) == 0.0
    assert estimate_local_time_tanaka(path, 50.0, 1.0) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(OffGridTime):
        estimate_local_time_tanaka(path, 0.0, 0.12345)


def test_invalid_requests(path):
    space = SpaceGrid.symmetric(1.0, 0.1)
    with pytest.raises(BandwidthTooSmall):
        estimate_local_time_occupation(path, space, [1.0], 0.04)
    with pytest.raises(BandwidthTooSmall):
        estimate_local_time_occupation(path, space, [1.0], 0.0)
    with pytest.raises(EmptyTimes):
        estimate_local_time_occupation(path, space, [])
    with pytest.raises(ValueError):
        estimate_local_time_occupation(path, space, [1.0, 0.5])


def test_exports(path, tmp_path):
    field = estimate_local_time_occupation(path, NEAR_ZERO, [0.25, 0.5, 1.0], 0.02)
    write_csv(field, tmp_path / "field.csv")
    write_binary(field, tmp_path / "field.npy")
    header, rows = read_rows(tmp_path / "field.csv")
    assert header[0] == "time" and len(header) == 22
    assert len(rows) == 3
    np.testing.assert_array_equal(np.load(tmp_path / "field.npy"), field.values)
