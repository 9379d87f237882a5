import math

import numpy as np
import pytest
from pydantic import ValidationError

from itostein.common import SQRT_2_OVER_PI
from itostein.errors import BoundViolation, DegenerateTime, EmptySample, NonpositiveRho, OffGridTime
from itostein.paths.ops import (
    density_from_samples,
    empirical_density_bound,
    read_binary,
    simulate_path,
    write_binary,
    write_csv,
)
from itostein.paths.schemas import IntegrandKind, IntegrandSpec, TimeGrid
from itostein.utils import read_rows


def test_uniform_grid():
    grid = TimeGrid.uniform(4)
    np.testing.assert_allclose(grid.points, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert grid.mesh == 0.25
    assert grid.n_steps == 4


def test_geometric_grid_is_finest_near_zero():
    grid = TimeGrid.geometric(100, 1.01)
    assert grid.points[0] == 0.0 and grid.points[-1] == 1.0
    assert np.all(np.diff(grid.steps) > 0)


@pytest.mark.parametrize("points", [[0.0, 0.5, 0.4, 1.0], [0.1, 1.0], [0.0, 0.5], [0.0]])
def test_invalid_grids_are_rejected(points):
    with pytest.raises(ValidationError):
        TimeGrid(points=points)


def test_index_of_requires_a_grid_point():
    grid = TimeGrid.uniform(10)
    assert grid.index_of(0.3) == 3
    assert grid.left_index(0.35) == 3
    with pytest.raises(OffGridTime):
        grid.index_of(0.35)


@pytest.mark.parametrize("build", [lambda: IntegrandSpec.constant(0.0), lambda: IntegrandSpec.bounded_sine(0.0, 1.0)])
def test_nonpositive_lower_bound(build):
    with pytest.raises(NonpositiveRho):
        build()


def test_constant_integrand_has_exact_quadratic_variation():
    grid = TimeGrid.uniform(500)
    path = simulate_path(IntegrandSpec.constant(2.0), grid, seed=7)
    np.testing.assert_allclose(path.quadratic_variation, 4.0 * grid.points, rtol=1e-12, atol=1e-15)


def test_left_endpoint_rule():
    path = simulate_path(IntegrandSpec.bounded_sine(1.0, 1.0), TimeGrid.uniform(1000), seed=3)
    assert path.x[0] == 0.0 and path.w[0] == 0.0
    np.testing.assert_allclose(np.diff(path.x), path.u[:-1] * np.diff(path.w), atol=1e-12)
    np.testing.assert_allclose(path.qv_increments, path.u[:-1] ** 2 * path.grid.steps)


def test_bounded_sine_stays_in_bounds():
    path = simulate_path(IntegrandSpec.bounded_sine(0.5, 2.0), TimeGrid.uniform(1000), seed=11)
    assert np.all(path.u >= 0.5) and np.all(path.u <= 2.5)


def test_same_seed_reproduces_path():
    spec, grid = IntegrandSpec.bounded_sine(1.0, 1.0), TimeGrid.uniform(256)
    a, b = simulate_path(spec, grid, 42), simulate_path(spec, grid, 42)
    np.testing.assert_array_equal(a.x, b.x)
    assert not np.array_equal(a.x, simulate_path(spec, grid, 43).x)


def test_scaling_the_constant_scales_the_path_exactly():
    grid = TimeGrid.uniform(512)
    one = simulate_path(IntegrandSpec.constant(1.0), grid, 3)
    two = simulate_path(IntegrandSpec.constant(2.0), grid, 3)
    np.testing.assert_array_equal(two.w, one.w)
    np.testing.assert_array_equal(two.x, 2.0 * one.x)


def test_custom_integrand_outside_its_bounds():
    spec = IntegrandSpec.custom(lambda time, w: 0.5, rho=1.0, upper=2.0)
    assert spec.kind == IntegrandKind.custom and not spec.verified
    with pytest.raises(BoundViolation):
        simulate_path(spec, TimeGrid.uniform(10), seed=0)


def test_custom_integrand_sees_the_brownian_history():
    spec = IntegrandSpec.custom(lambda time, w: 1.0 + 0.5 * np.tanh(np.max(w)) ** 2, rho=1.0, upper=1.5)
    path = simulate_path(spec, TimeGrid.uniform(50), seed=5)
    expected = [1.0 + 0.5 * np.tanh(np.max(path.w[: i + 1])) ** 2 for i in range(51)]
    np.testing.assert_allclose(path.u, expected)


def test_terminal_value_is_standard_normal(sample_paths):
    terminal = np.array([p.x[-1] for p in sample_paths("brownian", 50, 40000)])
    assert abs(np.mean(terminal)) < 0.02
    assert np.var(terminal) == pytest.approx(1.0, rel=0.03)


def test_quadratic_variation_error_halves_with_the_mesh(sample_paths):
    def mean_error(n_steps):
        paths = sample_paths("sine", n_steps, 200)
        return np.mean([abs(np.sum(np.diff(p.x) ** 2) - np.sum(p.qv_increments)) for p in paths])

    ratio = mean_error(1024) / mean_error(256)
    assert 0.3 < ratio < 0.7


@pytest.mark.parametrize("time", [1.0, 0.25])
def test_density_peak_of_brownian_motion(time):
    estimate = empirical_density_bound(IntegrandSpec.constant(1.0), time, 40000, bins=30, grid=TimeGrid.uniform(100))
    assert estimate.scaled_peak == pytest.approx(1 / math.sqrt(2 * math.pi), rel=0.06)
    assert estimate.max_density == pytest.approx(estimate.scaled_peak / math.sqrt(time))
    assert estimate.n_paths == 40000


def test_density_histogram_integrates_to_one():
    values = np.random.default_rng(0).standard_normal(5000)
    estimate = density_from_samples(values, 1.0, 40)
    inside = np.mean(np.abs(values) < 4 * np.std(values))
    assert np.sum(estimate.density * np.diff(estimate.edges)) == pytest.approx(inside)
    assert estimate.max_density < 2 * SQRT_2_OVER_PI


def test_density_edge_cases():
    spec = IntegrandSpec.constant(1.0)
    with pytest.raises(DegenerateTime):
        empirical_density_bound(spec, 0.0, 10)
    with pytest.raises(EmptySample):
        empirical_density_bound(spec, 1.0, 0)


def test_binary_dump(tmp_path):
    spec = IntegrandSpec.bounded_sine(1.0, 1.0)
    path = simulate_path(spec, TimeGrid.uniform(64), seed=2**63 + 5)
    destination = tmp_path / "path.bin"
    write_binary(path, spec, destination)

    raw = destination.read_bytes()
    assert len(raw) == 3 * 8 + 4 * 65 * 8
    np.testing.assert_array_equal(np.frombuffer(raw, dtype="<u8", count=3), [65, 2**63 + 5, spec.spec_id])

    loaded, spec_id = read_binary(destination)
    assert spec_id == spec.spec_id and loaded.seed == path.seed
    np.testing.assert_array_equal(loaded.x, path.x)
    np.testing.assert_array_equal(loaded.u, path.u)


def test_csv_dump(tmp_path):
    path = simulate_path(IntegrandSpec.constant(1.0), TimeGrid.uniform(8), seed=1)
    write_csv(path, tmp_path / "path.csv")
    header, rows = read_rows(tmp_path / "path.csv")
    assert header == ["t", "w", "u", "x"]
    assert len(rows) == 9
    assert float(rows[-1][3]) == pytest.approx(path.x[-1])
