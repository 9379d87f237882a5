import numpy as np
import pytest

from itostein.errors import InconsistentMollification, KernelNotNormalized
from itostein.ito import catalog
from itostein.ito.mollify import MollifierKernel, bump, bump_mass, mollify
from itostein.ito.schemas import WeakDiffFunction


def test_bump():
    assert bump(np.array([0.0]))[0] == pytest.approx(np.exp(-1.0))
    np.testing.assert_array_equal(bump(np.array([-1.0, 1.0, 1.5])), 0.0)
    assert bump_mass() == pytest.approx(0.443994, rel=1e-5)


@pytest.mark.parametrize("order", [4, 8, 64])
def test_kernel_weights_have_unit_mass(order):
    kernel = MollifierKernel(order=order)
    weights, derivative = kernel.weights(kernel.step())
    assert np.sum(weights) == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(weights, weights[::-1])
    assert np.sum(derivative) == pytest.approx(0.0, abs=1e-9)


def test_coarse_kernel_is_rejected():
    kernel = MollifierKernel(order=8, points_per_unit=1)
    with pytest.raises(KernelNotNormalized):
        kernel.weights(kernel.step())


def test_mollified_capped_abs():
    Fn = mollify(catalog.capped_abs(), MollifierKernel(order=8))
    x = np.array([-0.5, 0.5, 2.0])
    np.testing.assert_allclose(Fn.value(x, 0.0), [0.5, 0.5, 1.0], atol=1e-9)
    np.testing.assert_allclose(Fn.dx(x, 0.0), [-1.0, 1.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(Fn.dxx(np.array([0.5, 2.0]), 0.0), 0.0, atol=1e-9)
    # F_x jumps by 2 at the origin, so F_n'' = 2 g_n there.
    assert Fn.dxx(0.0, 0.0) == pytest.approx(2 * 8 * np.exp(-1.0) / bump_mass(), rel=0.02)
    assert Fn.value(0.0, 0.0) > 0.0
    assert 0.0 <= Fn.consistency_gap <= MollifierKernel().consistency_tolerance
    assert Fn.order == 8 and not Fn.time_dependent


def test_mollified_function_of_time():
    Fn = mollify(catalog.time_capped_abs(), MollifierKernel(order=8))
    assert Fn.time_dependent
    assert float(Fn.value(0.5, 0.5)) == pytest.approx(0.75, rel=1e-2)
    assert float(Fn.dt(0.5, 0.5)) == pytest.approx(0.5, rel=1e-2)
    assert float(Fn.dx(0.5, 0.5)) == pytest.approx(1.5, rel=1e-2)


def test_higher_orders_approach_the_function():
    F = catalog.capped_abs()
    gaps = [float(mollify(F, MollifierKernel(order=n)).value(0.0, 0.0)) for n in (8, 16, 32)]
    assert gaps[0] > gaps[1] > gaps[2] > 0


def _affine(slope, intercept, half_width=3.0, time_dependent=False):
    return WeakDiffFunction(
        value=lambda x, s: slope * np.asarray(x, dtype=float) + intercept + 0.0 * np.asarray(s, dtype=float),
        dx=lambda x, s: slope + 0.0 * np.asarray(x, dtype=float) * np.asarray(s, dtype=float),
        dt=lambda x, s: 0.0 * np.asarray(x, dtype=float) * np.asarray(s, dtype=float),
        half_width=half_width,
        time_dependent=time_dependent,
        name=f"{slope}x+{intercept}",
    )


@pytest.mark.parametrize("time_dependent", [False, True])
def test_constants_are_preserved(time_dependent):
    Fn = mollify(_affine(0.0, 2.5, time_dependent=time_dependent), MollifierKernel(order=16))
    x = np.linspace(-3.0, 3.0, 101)
    np.testing.assert_allclose(Fn.value(x, 0.3), 2.5, atol=1e-12)
    np.testing.assert_allclose(Fn.dx(x, 0.3), 0.0, atol=1e-12)
    np.testing.assert_allclose(Fn.dxx(x, 0.3), 0.0, atol=1e-9)
    assert Fn.consistency_gap <= 1e-9


def test_affine_functions_are_preserved_inside_the_support():
    Fn = mollify(_affine(2.0, -1.0), MollifierKernel(order=8))
    x = np.linspace(-3.0, 3.0, 241)
    np.testing.assert_allclose(Fn.value(x, 0.0), 2.0 * x - 1.0, atol=1e-9)
    np.testing.assert_allclose(Fn.dx(x, 0.0), 2.0, atol=1e-9)


def test_distance_to_the_absolute_value_halves_with_the_order():
    F = catalog.capped_abs()
    x = np.linspace(-2.0, 2.0, 4001)
    errors = [np.max(np.abs(mollify(F, MollifierKernel(order=n)).value(x, 0.0) - F.value(x, 0.0))) for n in (8, 16, 32, 64)]
    ratios = np.array(errors[1:]) / np.array(errors[:-1])
    np.testing.assert_allclose(ratios, 0.5, atol=0.05)


@pytest.mark.parametrize("name", ["square", "capped-abs", "time-capped-abs", "capped-positive"])
def test_catalog_mollifications_are_consistent(name):
    kernel = MollifierKernel(order=16)
    assert mollify(catalog.get(name), kernel).consistency_gap <= kernel.consistency_tolerance


def test_wrong_derivative_is_rejected():
    F = catalog.capped_abs()
    wrong = F.model_copy(update={"dx": lambda x, s: 0.0 * np.asarray(x, dtype=float) * np.asarray(s, dtype=float)})
    with pytest.raises(InconsistentMollification):
        mollify(wrong, MollifierKernel(order=8))
