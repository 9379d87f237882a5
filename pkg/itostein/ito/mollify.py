import functools
import logging
import math
import typing as t

import numpy as np
from pydantic import Field
from scipy import integrate, ndimage
from scipy.interpolate import RegularGridInterpolator

from itostein.common import Model
from itostein.errors import InconsistentMollification, KernelNotNormalized
from itostein.ito.schemas import MollifiedFunction, WeakDiffFunction

logger = logging.getLogger(__name__)


def bump(z: np.ndarray) -> np.ndarray:
    """exp(-1 / (1 - z^2)) on (-1, 1), 0 elsewhere."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1
    out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
    return out


def bump_prime(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1
    zi = z[inside]
    out[inside] = np.exp(-1.0 / (1.0 - zi**2)) * (-2.0 * zi / (1.0 - zi**2) ** 2)
    return out


@functools.lru_cache(maxsize=1)
def bump_mass() -> float:
    value, _ = integrate.quad(lambda z: math.exp(-1.0 / (1.0 - z * z)), -1.0, 1.0)
    return value


class MollifierKernel(Model):
    """Unit-mass kernel g_n(z) = n g(n z) built from the bump function, sampled on a uniform lattice."""

    order: int = Field(default=8, ge=1)
    points_per_unit: int = Field(default=16, ge=1)
    time_points_per_unit: int = Field(default=8, ge=1)
    mass_tolerance: float = 1e-3
    consistency_tolerance: float = 5e-2

    @property
    def half_support(self) -> float:
        return 1.0 / self.order

    def step(self, points_per_unit: t.Optional[int] = None) -> float:
        return 1.0 / (self.order * (points_per_unit or self.points_per_unit))

    def weights(self, step: float) -> t.Tuple[np.ndarray, np.ndarray]:
        """Discrete kernel and kernel-derivative weights for a lattice of spacing ``step``."""
        n = self.order
        m = math.ceil(self.half_support / step)
        z = np.arange(-m, m + 1) * step
        g = n * bump(n * z) / bump_mass()
        dg = n**2 * bump_prime(n * z) / bump_mass()
        mass = float(np.sum(g) * step)
        if abs(mass - 1.0) > self.mass_tolerance:
            raise KernelNotNormalized(f"Kernel of order {n} has discrete mass {mass:.6f} at step {step:g}.")
        return g * step / mass, dg * step / mass

    def with_order(self, order: int) -> "MollifierKernel":
        return self.model_copy(update={"order": order})


def _smooth(
    values: np.ndarray, x_weights: np.ndarray, t_weights: t.Optional[np.ndarray], x_mode: str, t_mode: str
) -> np.ndarray:
    out = ndimage.convolve1d(values, x_weights, axis=0, mode=x_mode)
    if t_weights is not None:
        out = ndimage.convolve1d(out, t_weights, axis=1, mode=t_mode)
    return out


def _lattice_function(xs: np.ndarray, ts: np.ndarray, values: np.ndarray, time_dependent: bool):
    if not time_dependent:
        column = values[:, 0]

        def evaluate(x, s):
            x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
            return np.interp(x, xs, column)

        return evaluate

    interpolator = RegularGridInterpolator((xs, ts), values, bounds_error=False, fill_value=None)

    def evaluate(x, s):
        x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
        return interpolator(np.stack([x, np.clip(s, ts[0], ts[-1])], axis=-1))

    return evaluate


def mollify(F: WeakDiffFunction, kernel: MollifierKernel) -> MollifiedFunction:
    """Convolve F with the kernel of the given order in x (and in t when F depends on time).

    F extends constantly in time outside [0, 1]. The result carries F_n, its first derivatives, the second
    space derivative F_x * g_n', and the gap between F * g_n' and F_x * g_n, which agree when F_x is the weak
    derivative of F.
    """
    hx = kernel.step()
    pad = 2 * kernel.half_support
    m = math.ceil((F.half_width + pad) / hx)
    xs = np.arange(-m, m + 1) * hx
    x_weights, x_dweights = kernel.weights(hx)

    if F.time_dependent:
        ht = kernel.step(kernel.time_points_per_unit)
        ts = np.linspace(0.0, 1.0, round(1.0 / ht) + 1)
        t_weights, _ = kernel.weights(ts[1] - ts[0])
    else:
        ts = np.array([0.0, 1.0])
        t_weights = None

    X, T = np.meshgrid(xs, ts, indexing="ij")
    values = np.broadcast_to(F.value(X, T), X.shape).astype(float)
    dx = np.broadcast_to(F.dx(X, T), X.shape).astype(float)
    dt = np.broadcast_to(F.dt(X, T), X.shape).astype(float)

    # F extends constantly beyond the lattice in both directions, so each derivative extends by zero
    # along its own direction and constantly along the other.
    smoothed = _smooth(values, x_weights, t_weights, "nearest", "nearest")
    smoothed_dx = _smooth(dx, x_weights, t_weights, "constant", "nearest")
    smoothed_dt = _smooth(dt, x_weights, t_weights, "nearest", "constant")
    smoothed_dxx = _smooth(dx, x_dweights, t_weights, "constant", "nearest")
    derivative_of_smoothed = _smooth(values, x_dweights, t_weights, "nearest", "nearest")

    interior = np.abs(xs) <= F.half_width
    scale = max(1.0, float(np.max(np.abs(smoothed_dx[interior]))))
    gap = float(np.max(np.abs(derivative_of_smoothed[interior] - smoothed_dx[interior]))) / scale
    if gap > kernel.consistency_tolerance:
        raise InconsistentMollification(
            f"Derivative of the mollified {F.name or 'F'} and the mollified derivative differ by {gap:.3g} "
            f"at order {kernel.order}; dx is not the weak derivative of value."
        )
    logger.debug("Mollified %s at order %d with consistency gap %.3g.", F.name, kernel.order, gap)

    def lattice(array):
        return _lattice_function(xs, ts, array, F.time_dependent)

    return MollifiedFunction(
        value=lattice(smoothed),
        dx=lattice(smoothed_dx),
        dt=lattice(smoothed_dt),
        dxx=lattice(smoothed_dxx),
        half_width=float(xs[-1]),
        time_dependent=F.time_dependent,
        name=f"{F.name}*g{kernel.order}",
        order=kernel.order,
        consistency_gap=gap,
    )
