import typing as t

import numpy as np

from itostein.common import OVERFLOW_THRESHOLD, Model

Integrand = t.Callable[[np.ndarray, np.ndarray], np.ndarray]


class QuadratureResult(Model):
    value: float
    history: t.List[float]
    resolution: t.Tuple[int, int]
    stable: bool


def power_weight_integral(lower: np.ndarray, upper: np.ndarray, exponent: float) -> np.ndarray:
    """Exact integral of s^-exponent over each cell [lower, upper], for exponent < 1."""
    power = 1.0 - exponent
    return (np.power(upper, power) - np.power(lower, power)) / power


def singular_cell_integral(
    integrand: Integrand,
    x_lo: float,
    x_hi: float,
    exponent: float,
    *,
    resolution: t.Tuple[int, int] = (64, 64),
    refinements: int = 3,
    rtol: float = 1e-2,
) -> QuadratureResult:
    """Integrate ``integrand(x, s) * s^-exponent`` over [x_lo, x_hi] x [0, 1].

    The weight is integrated exactly on every time cell and the integrand is sampled at cell midpoints.
    The cell count doubles in both directions on every refinement; the result is stable when the last
    relative change stays within ``rtol`` and every value is finite.
    """
    n_x, n_s = resolution
    history = []
    for level in range(refinements + 1):
        cells_x, cells_s = n_x * 2**level, n_s * 2**level
        x_edges = np.linspace(x_lo, x_hi, cells_x + 1)
        s_edges = np.linspace(0.0, 1.0, cells_s + 1)
        x_mid = 0.5 * (x_edges[1:] + x_edges[:-1])
        s_mid = 0.5 * (s_edges[1:] + s_edges[:-1])
        weights = power_weight_integral(s_edges[:-1], s_edges[1:], exponent)
        values = np.broadcast_to(integrand(x_mid[:, None], s_mid[None, :]), (cells_x, cells_s))
        history.append(float(np.sum(values * weights[None, :]) * (x_edges[1] - x_edges[0])))

    value = history[-1]
    finite = all(np.isfinite(h) and abs(h) < OVERFLOW_THRESHOLD for h in history)
    change = abs(history[-1] - history[-2]) if len(history) > 1 else 0.0
    scale = max(abs(history[-1]), abs(history[-2]) if len(history) > 1 else 0.0)
    stable = finite and (change == 0.0 or change <= rtol * scale)
    return QuadratureResult(
        value=value,
        history=history,
        resolution=(n_x * 2**refinements, n_s * 2**refinements),
        stable=stable,
    )
