import json

import numpy as np
import pytest
from scipy.integrate import trapezoid

from itostein.common import SQRT_2_OVER_PI
from itostein.errors import CertificateFailure, PartitionFinerThanPath, PartitionInvalid
from itostein.ito import catalog
from itostein.ito.mollify import MollifierKernel, mollify
from itostein.ito.ops import (
    CHAIN_TERMS,
    certify,
    chain_bandwidth,
    classical_ito_terms,
    covariation_residual,
    decreasing_with_one_inversion,
    halving_verdict,
    ito_residual,
    ito_stochastic_integral,
    lebesgue_time_integral,
    quadratic_covariation,
    smooth_step,
    time_integral_F,
    verify_smooth_ito_chain,
)
from itostein.ito.schemas import RESIDUAL_TERMS, ItoReport, ResidualSample, WeakDiffFunction
from itostein.partitions.ops import custom_sequence, make_partition_sequence
from itostein.partitions.schemas import PartitionKind
from itostein.paths.ops import simulate_path
from itostein.paths.schemas import IntegrandSpec, TimeGrid
from itostein.utils import read_rows

UNIFORM_10 = make_partition_sequence(PartitionKind.uniform, 10)
UNIFORM_12 = make_partition_sequence(PartitionKind.uniform, 12)


@pytest.fixture(scope="module")
def path():
    return simulate_path(IntegrandSpec.bounded_sine(1.0, 1.0), TimeGrid.uniform(1024), seed=21)


def test_smooth_step():
    np.testing.assert_allclose(smooth_step(np.array([-1.0, 0.0, 0.5, 1.0, 2.0])), [0.0, 0.0, 0.5, 1.0, 1.0])


def test_covariation_of_a_constant_is_zero(path):
    result = quadratic_covariation(catalog.constant(2.0, half_width=10.0), path, UNIFORM_10)
    np.testing.assert_array_equal(result.values, 0.0)
    np.testing.assert_array_equal(result.meshes, 2.0 ** -np.arange(1, 11))


def test_covariation_of_the_identity_is_the_quadratic_variation(sample_paths):
    identity = catalog.identity(10.0)
    values = [quadratic_covariation(identity, p, UNIFORM_12).limit for p in sample_paths("brownian", 4096, 200)]
    assert np.mean(values) == pytest.approx(1.0, rel=0.02)


def test_covariation_of_sign_is_twice_the_local_time(sample_paths):
    sign = catalog.sign(10.0)
    values = [quadratic_covariation(sign, p, UNIFORM_12).limit for p in sample_paths("brownian", 4096, 4000)]
    assert np.mean(values) == pytest.approx(2 * SQRT_2_OVER_PI, rel=0.07)


@pytest.mark.parametrize("function", ["identity", "sign"])
def test_covariation_does_not_depend_on_the_partition_family(sample_paths, function):
    f = catalog.get_space_time(function, half_width=10.0)
    geometric = make_partition_sequence(PartitionKind.geometric_dyadic, 10)
    uniform, dyadic = [], []
    for p in sample_paths("brownian", 4096, 300):
        uniform.append(quadratic_covariation(f, p, UNIFORM_10).limit)
        dyadic.append(quadratic_covariation(f, p, geometric).limit)
    assert np.mean(dyadic) == pytest.approx(np.mean(uniform), rel=0.03)


def test_partitions_finer_than_the_path(path):
    with pytest.raises(PartitionFinerThanPath):
        quadratic_covariation(catalog.identity(), path, UNIFORM_12)


@pytest.mark.parametrize(
    "family",
    [[[0.0, 0.5, 1.0]] * 2, [[0.0, 4.0**-n, 0.5, 1.0] for n in range(1, 6)]],
    ids=["stalled-mesh", "unbounded-ratio"],
)
def test_invalid_partition_families(path, family):
    with pytest.raises(PartitionInvalid):
        quadratic_covariation(catalog.identity(), path, custom_sequence(family))


def test_time_integral_of_F(path):
    assert time_integral_F(lambda x, s: s**2 + 0.0 * x, path, UNIFORM_10) == pytest.approx(1.0, rel=1e-12)
    assert time_integral_F(lambda x, s: x + 0.0 * s, path, UNIFORM_10) == 0.0
    riemann = time_integral_F(lambda x, s: s * x, path, UNIFORM_10)
    assert riemann == pytest.approx(trapezoid(path.x, path.times), abs=0.01)


def test_stochastic_integral_identities(path):
    assert ito_stochastic_integral(lambda x, s: np.ones_like(x), path, 1.0) == pytest.approx(path.x[-1], abs=1e-12)
    forward = ito_stochastic_integral(lambda x, s: x, path, 1.0)
    assert forward == pytest.approx(0.5 * (path.x[-1] ** 2 - np.sum(np.diff(path.x) ** 2)), abs=1e-10)
    assert ito_stochastic_integral(lambda x, s: x, path, 0.5, start=0.5) == 0.0


def test_lebesgue_time_integral(path):
    assert lebesgue_time_integral(lambda x, s: np.ones_like(x), path, 1.0) == pytest.approx(1.0)
    assert lebesgue_time_integral(lambda x, s: np.ones_like(x), path, 1.0, start=0.25) == pytest.approx(0.75)


def test_stochastic_integral_is_a_centered_martingale(sample_paths):
    values = np.array([ito_stochastic_integral(lambda x, s: x, p, 1.0) for p in sample_paths("brownian", 100, 10000)])
    assert abs(np.mean(values)) <= 4 * np.std(values) / np.sqrt(len(values))
    assert np.var(values) == pytest.approx(0.5, rel=0.15)


def test_certificates():
    zero = certify(catalog.zero())
    assert zero.stable and zero.time_integral == 0.0 and zero.space_integral == 0.0

    capped = certify(catalog.capped_abs())
    assert capped.time_integral == 0.0
    assert capped.space_integral == pytest.approx(4.0, rel=0.02)

    timed = certify(catalog.time_capped_abs())
    assert timed.time_integral == pytest.approx(10.0, rel=1e-2)
    assert timed.space_integral == pytest.approx(2 * (2 + 4 / 3 + 2 / 5), rel=0.02)


def test_certificate_failure():
    F = WeakDiffFunction(
        value=lambda x, s: 0.0 * x * s,
        dx=lambda x, s: 0.0 * x * s,
        dt=lambda x, s: s**-0.75 + 0.0 * x,
        half_width=1.0,
        name="rough-in-time",
    )
    with pytest.raises(CertificateFailure):
        certify(F)


def test_residual_of_zero(path):
    sample = ito_residual(catalog.zero(), path)
    assert all(getattr(sample, name) == 0.0 for name in RESIDUAL_TERMS)
    assert sample.converged


def test_residual_breakdown(path):
    F = catalog.capped_abs()
    sample = ito_residual(F, path)
    assert sample.residual == sample.recombined()
    assert sample.terminal == pytest.approx(min(abs(path.x[-1]), 1.0))
    assert sample.initial == 0.0

    late = ito_residual(F, path, eps=0.25)
    assert late.eps == 0.25
    assert late.initial == pytest.approx(min(abs(path.value_at(0.25)), 1.0))
    assert late.residual == pytest.approx(late.recombined())


@pytest.mark.parametrize("kind", ["brownian", "sine"])
@pytest.mark.parametrize("name", ["square", "capped-abs", "time-capped-abs", "capped-positive"])
def test_mean_residual_vanishes(sample_paths, name, kind):
    F = catalog.get(name)
    certificates = certify(F)
    residuals = np.array([ito_residual(F, p, certificates=certificates).residual for p in sample_paths(kind, 4096, 200)])
    mean, stderr = np.mean(residuals), np.std(residuals, ddof=1) / np.sqrt(len(residuals))
    assert abs(mean) <= 0.05
    assert abs(mean) <= 3 * stderr


def test_certificates_record_the_derivative_norm():
    assert certify(catalog.capped_abs()).derivative_norm == pytest.approx(np.sqrt(2 * 4), rel=0.02)
    assert certify(catalog.zero()).derivative_norm == 0.0


def test_residual_of_the_square(sample_paths):
    F = catalog.square()
    certificates = certify(F)
    residuals = np.array([ito_residual(F, p, certificates=certificates).residual for p in sample_paths("brownian", 1000, 50)])
    assert abs(np.mean(residuals)) <= 0.05
    assert np.max(np.abs(residuals)) <= 0.25


def test_covariation_form_is_exact_for_the_square(path):
    sample = covariation_residual(catalog.square(), path, UNIFORM_10)
    assert sample.time == 0.0
    assert sample.local_time == pytest.approx(-2 * np.sum(np.diff(path.x) ** 2))
    assert sample.residual == pytest.approx(0.0, abs=1e-9)


def test_covariation_form_for_capped_abs(sample_paths):
    F = catalog.capped_abs()
    residuals = [covariation_residual(F, p, UNIFORM_10).residual for p in sample_paths("brownian", 1024, 200)]
    assert abs(np.mean(residuals)) <= 0.05


def test_classical_terms_match_the_extended_formula_for_a_smooth_function(sample_paths):
    F = catalog.square()
    Fn = mollify(F, MollifierKernel(order=8))
    certificates = certify(F)
    differences = [
        abs(classical_ito_terms(Fn, p)["residual"] - ito_residual(F, p, certificates=certificates).residual)
        for p in sample_paths("brownian", 4000, 10)
    ]
    assert np.mean(differences) <= 0.05


def test_smooth_chain(path):
    F = catalog.capped_abs()
    table = verify_smooth_ito_chain(F, [32, 8, 16], path)
    assert [row.order for row in table.rows] == [8, 16, 32]
    assert isinstance(table.converging, bool)
    assert set(table.ratios) == set(CHAIN_TERMS)
    initial = [row.distances["initial"] for row in table.rows]
    assert initial[0] > initial[1] > initial[2] > 0
    np.testing.assert_allclose(table.ratios["initial"], 0.5, atol=0.05)
    assert table.ratios["time"] == [None, None]

    single = verify_smooth_ito_chain(F, [8], path)
    assert single.converging is None and single.ratios == {}


def test_chain_bandwidth_resolves_the_narrowest_kernel():
    assert chain_bandwidth([8, 64, 16]) == 1 / 256


def test_halving_verdict():
    scale = np.random.default_rng(0).uniform(0.5, 1.5, size=(50, 1))
    ratios, passed = halving_verdict(scale * 0.5 ** np.arange(4))
    np.testing.assert_allclose(ratios, 0.5)
    assert passed
    assert halving_verdict(scale * 0.25 ** np.arange(4))[1]
    assert not halving_verdict(scale * np.array([1.0, 0.5, 0.45, 0.44]))[1]
    assert halving_verdict(np.zeros((50, 4))) == ([None, None, None], True)
    assert halving_verdict(np.column_stack([np.zeros(50), scale[:, 0]])) == ([None], False)


def test_noisy_ratios_get_the_benefit_of_the_doubt():
    coarse = np.repeat(np.random.default_rng(1).exponential(1.0, size=20), 2)
    fine = coarse * (0.8 + np.tile([0.4, -0.4], 20))
    ratios, passed = halving_verdict(np.column_stack([coarse, fine]), max_ratio=0.75, z=0.0)
    assert not passed
    assert halving_verdict(np.column_stack([coarse, fine]), max_ratio=0.75, z=10.0) == (ratios, True)


@pytest.mark.parametrize(
    "values, expected",
    [([3.0, 2.0, 1.0], True), ([3.0, 2.5, 2.7, 1.0], True), ([1.0, 2.0, 1.0, 2.0], False), ([1.0], True)],
)
def test_decreasing_with_one_inversion(values, expected):
    assert decreasing_with_one_inversion(values) is expected


def test_report(tmp_path):
    samples = [ResidualSample.assemble(1.0, 0.0, 0.5, 0.0, -1.0 + d) for d in (0.1, -0.1, 0.0)]
    report = ItoReport.from_samples(samples, experiment="demo", function="capped-abs")
    assert report.n_paths == 3
    assert report.mean == pytest.approx(0.0, abs=1e-12)
    assert report.max_abs == pytest.approx(0.05)
    report.write_csv(tmp_path / "residuals.csv")
    header, rows = read_rows(tmp_path / "residuals.csv")
    assert header == ["path", *RESIDUAL_TERMS] and len(rows) == 3
    report.write(tmp_path / "report.json")
    assert ItoReport.model_validate(json.loads((tmp_path / "report.json").read_text())).n_paths == 3
