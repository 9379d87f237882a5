import logging
import math
import pathlib
import typing as t

import numpy as np

from itostein.common import GRID_ATOL
from itostein.errors import DivergentNorm, GridMismatch, NoConvergence, NotInH
from itostein.localtime.ops import default_bandwidth, estimate_local_time_occupation
from itostein.localtime.schemas import LocalTimeField, SpaceGrid
from itostein.ltintegral.schemas import (
    DEFAULT_EPS_SCHEDULE,
    ElementaryFunction,
    EpsilonExtension,
    HNorm,
    LocalTimeIntegral,
    Projection,
    RefinementSchedule,
    SpaceTimeFunction,
)
from itostein.paths.schemas import SamplePath
from itostein.quadrature import power_weight_integral, singular_cell_integral
from itostein.utils import clip_points, match_indices, union_points, write_rows

logger = logging.getLogger(__name__)

# Exponent of the time weight s^-3/4 in the norm.
NORM_EXPONENT = 0.75


def h_norm(
    f: SpaceTimeFunction,
    resolution: t.Tuple[int, int] = (64, 64),
    refinements: int = 3,
    rtol: float = 5e-2,
) -> HNorm:
    """Norm (int int f^2 s^-3/4 dx ds)^1/2 over [-A, A] x [0, 1]."""
    if f.elementary is not None and f.window is None:
        e = f.elementary
        weights = power_weight_integral(e.s_breaks[:-1], e.s_breaks[1:], NORM_EXPONENT)
        squared = float(np.sum(e.coefficients**2 * np.diff(e.x_breaks)[:, None] * weights[None, :]))
        return HNorm(value=math.sqrt(squared), squared=squared, exact=True)

    result = singular_cell_integral(
        lambda x, s: f(x, s) ** 2,
        -f.half_width,
        f.half_width,
        NORM_EXPONENT,
        resolution=resolution,
        refinements=refinements,
        rtol=rtol,
    )
    if not result.stable:
        raise DivergentNorm(f"Norm of {f.name or 'f'} did not stabilize: {result.history}.")
    squared = max(result.value, 0.0)
    return HNorm(
        value=math.sqrt(squared),
        squared=squared,
        exact=False,
        history=result.history,
        resolution=result.resolution,
    )


def has_finite_norm(f: SpaceTimeFunction) -> bool:
    try:
        h_norm(f)
    except DivergentNorm:
        return False
    return True


def project_to_elementary(
    f: SpaceTimeFunction,
    x_breaks: np.ndarray,
    s_breaks: np.ndarray,
    *,
    certify: bool = True,
    with_distance: bool = True,
) -> Projection:
    """Elementary function taking the value of f at the midpoint of every rectangle."""
    if certify:
        try:
            h_norm(f)
        except DivergentNorm as e:
            raise NotInH(f"{f.name or 'f'} does not have a finite norm.") from e

    x_breaks = np.asarray(x_breaks, dtype=float)
    s_breaks = np.asarray(s_breaks, dtype=float)
    x_mid = 0.5 * (x_breaks[1:] + x_breaks[:-1])
    s_mid = 0.5 * (s_breaks[1:] + s_breaks[:-1])
    projected = ElementaryFunction(x_breaks=x_breaks, s_breaks=s_breaks, coefficients=f(x_mid[:, None], s_mid[None, :]))

    distance = None
    if with_distance:
        residual = SpaceTimeFunction(
            evaluator=lambda x, s: f(x, s) - projected(x, s),
            half_width=max(f.half_width, float(np.max(np.abs(x_breaks)))),
            name=f"{f.name}-projection",
        )
        distance = h_norm(residual).value
    return Projection(function=projected, distance=distance)


def integrate_elementary(f: ElementaryFunction, field: LocalTimeField, time: float) -> float:
    """Sum of f_kl times the rectangle increment of L over (x_k, x_{k+1}] x (s_l, s_{l+1}], cut at ``time``."""
    s_used = clip_points(f.s_breaks, time)
    n_cells = len(s_used) - 1
    if n_cells <= 0:
        return 0.0

    x_index, x_found = match_indices(field.space.levels, f.x_breaks)
    s_index, s_found = match_indices(field.times, s_used)
    if not (np.all(x_found) and np.all(s_found)):
        missing = np.concatenate((f.x_breaks[~x_found], s_used[~s_found]))
        raise GridMismatch(f"Breaks {missing.tolist()} are not nodes of the local-time field.")

    corners = field.values[np.ix_(s_index, x_index)]
    rectangles = corners[1:, 1:] - corners[:-1, 1:] - corners[1:, :-1] + corners[:-1, :-1]
    return float(np.sum(f.coefficients[:, :n_cells] * rectangles.T))


class BreakSets(t.NamedTuple):
    x_sets: t.List[np.ndarray]
    s_sets: t.List[np.ndarray]
    field_levels: np.ndarray
    field_times: np.ndarray
    lattice_spacing: float


def _break_sets(f: SpaceTimeFunction, time: float, schedule: RefinementSchedule, max_spacing: float) -> BreakSets:
    """Nested break sets of the refinement schedule, ending with the field lattice itself.

    The lattice refines the finest schedule breaks until its spacing is at most ``max_spacing``.
    """
    finest_x = schedule.x_cells * 2 ** (schedule.levels - 1)
    finest_s = schedule.s_cells * 2 ** (schedule.levels - 1)
    factor = max(1, math.ceil(2 * f.half_width / finest_x / max_spacing - 1e-9))
    lattice = np.linspace(-f.half_width, f.half_width, finest_x * factor + 1)
    x_kinks = f.x_kinks[np.abs(f.x_kinks) < f.half_width]
    s_lattice = np.linspace(0.0, 1.0, finest_s + 1)
    s_kinks = union_points(f.s_kinks[(f.s_kinks > 0) & (f.s_kinks < 1)], np.array([time]))

    x_sets, s_sets = [], []
    for level in range(schedule.levels):
        stride = 2 ** (schedule.levels - 1 - level)
        x_sets.append(union_points(lattice[:: factor * stride], x_kinks))
        s_sets.append(union_points(s_lattice[::stride], s_kinks))
    if factor > 1:
        x_sets.append(union_points(lattice, x_kinks))
        s_sets.append(s_sets[-1])

    field_times = union_points(s_lattice, s_kinks)
    return BreakSets(
        x_sets=x_sets,
        s_sets=s_sets,
        field_levels=union_points(lattice, x_kinks),
        field_times=field_times[field_times <= time + GRID_ATOL],
        lattice_spacing=float(lattice[1] - lattice[0]),
    )


def integrate_wrt_local_time(
    f: SpaceTimeFunction,
    path: SamplePath,
    time: float,
    schedule: t.Optional[RefinementSchedule] = None,
    *,
    bandwidth: t.Optional[float] = None,
    certify: bool = True,
    strict: bool = True,
) -> LocalTimeIntegral:
    """Integral of f over [0, time] x R against the local time of ``path``.

    Elementary functions are integrated exactly. Other functions are projected onto a refining schedule
    of elementary functions whose last level is the local-time lattice; the value is the finest
    projection's integral and the error the last increment between levels. Without an explicit
    bandwidth, the lattice spacing (at most sqrt(mesh)) is used, so every step covers exactly two levels.
    """
    schedule = schedule or RefinementSchedule()
    if certify:
        try:
            h_norm(f)
        except DivergentNorm as e:
            raise NotInH(f"{f.name or 'f'} does not have a finite norm.") from e

    if f.elementary is None:
        breaks = _break_sets(f, time, schedule, bandwidth or default_bandwidth(path.grid.mesh, 0.0))
        bandwidth = bandwidth or breaks.lattice_spacing
    elif bandwidth is None:
        bandwidth = default_bandwidth(path.grid.mesh, 0.0)

    if f.elementary is not None:
        e = f.elementary
        cells = max(1, math.ceil((e.x_breaks[-1] - e.x_breaks[0]) / bandwidth - 1e-9))
        levels = union_points(np.linspace(e.x_breaks[0], e.x_breaks[-1], cells + 1), e.x_breaks)
        times = clip_points(e.s_breaks, time)
        field = estimate_local_time_occupation(path, SpaceGrid(levels=levels), times, bandwidth)
        value = integrate_elementary(e, field, time)
        return LocalTimeIntegral(value=value, error=0.0, levels=[value], converged=True)

    field = estimate_local_time_occupation(path, SpaceGrid(levels=breaks.field_levels), breaks.field_times, bandwidth)
    values = []
    for x_breaks, s_breaks in zip(breaks.x_sets, breaks.s_sets):
        projection = project_to_elementary(f, x_breaks, s_breaks, certify=False, with_distance=False)
        values.append(integrate_elementary(projection.function, field, time))

    increments = np.abs(np.diff(values))
    value = values[-1]
    error = float(increments[-1]) if len(increments) else 0.0
    tolerance = max(schedule.abs_tol, schedule.rel_tol * abs(value))
    converged = len(increments) == 0 or error <= tolerance or increments[-1] < increments[0]
    if not converged:
        message = f"Refinement of {f.name or 'f'} did not converge on path {path.seed}: increments {increments.tolist()}."
        if strict:
            raise NoConvergence(message)
        logger.warning(message)
    return LocalTimeIntegral(value=value, error=error, levels=values, converged=converged)


def extrapolate_to_zero(eps: t.Sequence[float], values: t.Sequence[float]) -> float:
    """Polynomial in sqrt(eps) through the last (up to) three points, evaluated at eps = 0."""
    z = np.sqrt(np.asarray(eps, dtype=float))[-3:]
    v = np.asarray(values, dtype=float)[-3:]
    return float(np.polynomial.polynomial.polyfit(z, v, deg=len(z) - 1)[0])


def extend_epsilon_to_zero(
    f: SpaceTimeFunction,
    path: SamplePath,
    time: float,
    eps_schedule: t.Sequence[float] = DEFAULT_EPS_SCHEDULE,
    *,
    schedule: t.Optional[RefinementSchedule] = None,
    bandwidth: t.Optional[float] = None,
    certify: bool = True,
    strict: bool = True,
    in_h: t.Optional[bool] = None,
) -> EpsilonExtension:
    """Limit as eps -> 0 of the integrals of f * 1{eps < s <= time}.

    When f has a finite norm on all of [0, time] the limit is its integral over [0, time], and the eps
    values only feed the Cauchy check. Otherwise the limit is extrapolated in sqrt(eps). Pass ``in_h`` to
    skip the norm check when the answer is already known.
    """
    eps = sorted((float(e) for e in eps_schedule), reverse=True)
    if not eps or eps[-1] <= 0:
        raise ValueError(f"Epsilon schedule must be nonempty and positive, got {list(eps_schedule)}.")
    if in_h is None:
        in_h = has_finite_norm(f)

    kwargs = dict(schedule=schedule, bandwidth=bandwidth, certify=certify, strict=strict)
    values = [integrate_wrt_local_time(f.restrict_time(e, time), path, time, **kwargs).value for e in eps]
    if in_h:
        full = integrate_wrt_local_time(f, path, time, **kwargs)
        limit, converged = full.value, full.converged
    elif len(values) == 1:
        logger.warning("A single epsilon gives no extrapolation; reporting the value at eps=%g.", eps[0])
        return EpsilonExtension(eps=eps, values=values, limit=values[0], error=0.0, degenerate=True, converged=True)
    else:
        limit, converged = extrapolate_to_zero(eps, values), True

    increments = np.abs(np.diff(values))
    tolerance = max(1e-3, 1e-2 * abs(limit))
    cauchy = len(increments) < 2 or increments[-1] <= increments[0] or increments[-1] <= tolerance
    if not cauchy:
        message = f"Epsilon extension of {f.name or 'f'} is not Cauchy on path {path.seed}: increments {increments.tolist()}."
        if strict:
            raise NoConvergence(message)
        logger.warning(message)
    return EpsilonExtension(
        eps=eps,
        values=values,
        limit=limit,
        error=abs(limit - values[-1]),
        degenerate=False,
        converged=converged and cauchy,
    )


def write_csv(f: ElementaryFunction, destination: pathlib.Path):
    """Break lists followed by one (k, l, f_kl) row per rectangle."""
    rows = [["x_breaks", *f.x_breaks.tolist()], ["s_breaks", *f.s_breaks.tolist()]]
    rows += [[k, l, f.coefficients[k, l]] for k in range(f.coefficients.shape[0]) for l in range(f.coefficients.shape[1])]
    write_rows(destination, ["k", "l", "f_kl"], rows)
