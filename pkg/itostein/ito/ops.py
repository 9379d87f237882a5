import logging
import typing as t

import numpy as np

from itostein.errors import (
    CertificateFailure,
    DivergentNorm,
    MeshNotVanishing,
    PartitionFinerThanPath,
    PartitionInvalid,
    RatioUnbounded,
)
from itostein.ito.schemas import (
    Certificates,
    ChainRow,
    ChainTable,
    CovariationResult,
    MollifiedFunction,
    ResidualConfig,
    ResidualSample,
    WeakDiffFunction,
)
from itostein.ito.mollify import MollifierKernel, mollify
from itostein.ltintegral.ops import extend_epsilon_to_zero, h_norm, integrate_wrt_local_time
from itostein.ltintegral.schemas import Evaluator
from itostein.partitions.ops import DEFAULT_RATIO_CAP, validate_condition_m
from itostein.partitions.schemas import Partition, PartitionSequence
from itostein.paths.schemas import SamplePath
from itostein.quadrature import singular_cell_integral
from itostein.utils import clip_points, left_indices

logger = logging.getLogger(__name__)

CHAIN_TERMS = ("terminal", "initial", "stochastic", "time", "local_time")

# Distances below this count as zero in the chain verdict.
DISTANCE_FLOOR = 1e-9


def _psi(y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    positive = y > 0
    out[positive] = np.exp(-1.0 / y[positive])
    return out


def _psi_prime(y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    positive = y > 0
    out[positive] = np.exp(-1.0 / y[positive]) / y[positive] ** 2
    return out


def smooth_step(y: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for y <= 0, 1 for y >= 1."""
    y = np.asarray(y, dtype=float)
    a, b = _psi(y), _psi(1.0 - y)
    return a / (a + b)


def smooth_step_prime(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    a, b = _psi(y), _psi(1.0 - y)
    da, db = _psi_prime(y), _psi_prime(1.0 - y)
    return (da * b + a * db) / (a + b) ** 2


def localize(F: WeakDiffFunction, half_width: float, width: float = 1.0) -> WeakDiffFunction:
    """F times a smooth cutoff equal to 1 on |x| <= half_width - width and 0 for |x| >= half_width."""
    if not 0 < width <= half_width:
        raise ValueError(f"Cutoff width must lie in (0, {half_width}], got {width}.")
    inner = half_width - width

    def cutoff(x):
        return 1.0 - smooth_step((np.abs(x) - inner) / width)

    def cutoff_prime(x):
        return -smooth_step_prime((np.abs(x) - inner) / width) * np.sign(x) / width

    return WeakDiffFunction(
        value=lambda x, s: F.value(x, s) * cutoff(x),
        dx=lambda x, s: F.dx(x, s) * cutoff(x) + F.value(x, s) * cutoff_prime(x),
        dt=lambda x, s: F.dt(x, s) * cutoff(x),
        half_width=half_width,
        x_kinks=F.x_kinks[np.abs(F.x_kinks) < half_width],
        s_kinks=F.s_kinks,
        time_dependent=F.time_dependent,
        name=F.name,
    )


def _derivative_norm(F: WeakDiffFunction, resolution: t.Tuple[int, int], refinements: int, rtol: float) -> t.Optional[float]:
    try:
        return h_norm(F.space_derivative(), resolution, refinements, rtol).value
    except DivergentNorm:
        return None


def certify(
    F: WeakDiffFunction,
    resolution: t.Tuple[int, int] = (64, 64),
    refinements: int = 3,
    rtol: float = 5e-2,
) -> Certificates:
    """Check that |F_t| s^-1/2 and F_x^2 s^-1/2 have finite integrals over the support box, and record the norm of F_x."""
    kwargs = dict(resolution=resolution, refinements=refinements, rtol=rtol)
    time_part = singular_cell_integral(lambda x, s: np.abs(F.dt(x, s)), -F.half_width, F.half_width, 0.5, **kwargs)
    space_part = singular_cell_integral(lambda x, s: F.dx(x, s) ** 2, -F.half_width, F.half_width, 0.5, **kwargs)
    certificates = Certificates(
        time_integral=time_part.value,
        space_integral=space_part.value,
        time_history=time_part.history,
        space_history=space_part.history,
        stable=time_part.stable and space_part.stable,
        derivative_norm=_derivative_norm(F, resolution, refinements, rtol),
    )
    if not certificates.stable:
        raise CertificateFailure(
            f"Integrability of {F.name or 'F'} is not certified: time {time_part.history}, space {space_part.history}."
        )
    return certificates


def _check_partitions(sequence: PartitionSequence, path: SamplePath, cap: float):
    try:
        validate_condition_m(sequence, cap=cap)
    except (MeshNotVanishing, RatioUnbounded) as e:
        raise PartitionInvalid(str(e)) from e
    finest = sequence.finest.mesh
    if finest < path.grid.mesh * (1 - 1e-9):
        raise PartitionFinerThanPath(f"Partition mesh {finest:g} is finer than the path mesh {path.grid.mesh:g}.")


def _sample_on(path: SamplePath, partition: Partition, time: float) -> t.Tuple[np.ndarray, np.ndarray]:
    """Partition points cut at ``time`` and the path values at their nearest-left grid points."""
    points = clip_points(partition.points, time)
    return points, path.x[left_indices(path.grid.points, points)]


def quadratic_covariation(
    f: Evaluator,
    path: SamplePath,
    sequence: PartitionSequence,
    time: float = 1.0,
    cap: float = DEFAULT_RATIO_CAP,
) -> CovariationResult:
    """Sums of (f(X_{t_{i+1}}, t_{i+1}) - f(X_{t_i}, t_i)) * (X_{t_{i+1}} - X_{t_i}) along the partition family."""
    _check_partitions(sequence, path, cap)
    values = []
    for partition in sequence.family:
        points, x = _sample_on(path, partition, time)
        values.append(float(np.sum(np.diff(f(x, points)) * np.diff(x))))
    return CovariationResult(
        meshes=sequence.mesh_profile,
        values=values,
        limit=values[-1],
        error=abs(values[-1] - values[-2]) if len(values) > 1 else 0.0,
    )


def time_integral_F(
    F: Evaluator, path: SamplePath, sequence: PartitionSequence, time: float = 1.0, cap: float = DEFAULT_RATIO_CAP
) -> float:
    """Sum of F(X_{t_{i+1}}, t_{i+1}) - F(X_{t_{i+1}}, t_i) on the finest partition."""
    _check_partitions(sequence, path, cap)
    points, x = _sample_on(path, sequence.finest, time)
    return float(np.sum(F(x[1:], points[1:]) - F(x[1:], points[:-1])))


def ito_stochastic_integral(h: Evaluator, path: SamplePath, time: float, start: float = 0.0) -> float:
    """Forward sum of h(X_{t_i}, t_i) * (X_{t_{i+1}} - X_{t_i}) over grid steps in [start, time]."""
    first, last = path.grid.left_index(start), path.grid.left_index(time)
    x, s = path.x[first : last + 1], path.times[first : last + 1]
    return float(np.sum(h(x[:-1], s[:-1]) * np.diff(x)))


def lebesgue_time_integral(g: Evaluator, path: SamplePath, time: float, start: float = 0.0) -> float:
    first, last = path.grid.left_index(start), path.grid.left_index(time)
    x, s = path.x[first:last], path.times[first:last]
    return float(np.sum(g(x, s) * path.grid.steps[first:last]))


def ito_residual(
    F: WeakDiffFunction,
    path: SamplePath,
    time: float = 1.0,
    eps: float = 0.0,
    config: t.Optional[ResidualConfig] = None,
    certificates: t.Optional[Certificates] = None,
) -> ResidualSample:
    """Residual of the extended Itô formula for F along one path.

    With ``eps > 0`` every term starts at eps and the local-time term integrates F_x over (eps, time];
    with ``eps = 0`` the local-time term is the eps -> 0 extension of those integrals, which is the integral
    over (0, time] itself when F_x has a finite norm.
    """
    config = config or ResidualConfig()
    if certificates is None:
        certificates = certify(F)
    elif not certificates.stable:
        raise CertificateFailure(f"Integrability of {F.name or 'F'} is not certified.")

    f = F.space_derivative()
    kwargs = dict(schedule=config.schedule, bandwidth=config.bandwidth, certify=False, strict=config.strict)
    terminal = float(F.value(path.value_at(time), time))
    if eps > 0:
        initial = float(F.value(path.value_at(eps), eps))
        local = integrate_wrt_local_time(f.restrict_time(eps, time), path, time, **kwargs)
        local_time, converged = local.value, local.converged
    else:
        initial = float(F.value(0.0, 0.0))
        in_h = certificates.derivative_norm is not None
        extension = extend_epsilon_to_zero(f, path, time, config.eps_schedule, in_h=in_h, **kwargs)
        local_time, converged = extension.limit, extension.converged

    return ResidualSample.assemble(
        terminal=terminal,
        initial=initial,
        stochastic=ito_stochastic_integral(F.dx, path, time, start=eps),
        time=lebesgue_time_integral(F.dt, path, time, start=eps),
        local_time=local_time,
        eps=eps,
        converged=converged,
    )


def covariation_residual(
    F: WeakDiffFunction, path: SamplePath, sequence: PartitionSequence, time: float = 1.0, cap: float = DEFAULT_RATIO_CAP
) -> ResidualSample:
    """Residual of F = F(0, 0) + int F_x dX + [F_x(X), X] / 2 + int F(X_s, ds), on the finest partition."""
    covariation = quadratic_covariation(F.dx, path, sequence, time, cap)
    return ResidualSample.assemble(
        terminal=float(F.value(path.value_at(time), time)),
        initial=float(F.value(0.0, 0.0)),
        stochastic=ito_stochastic_integral(F.dx, path, time),
        time=time_integral_F(F.value, path, sequence, time, cap),
        local_time=-covariation.limit,
    )


def classical_ito_terms(Fn: MollifiedFunction, path: SamplePath, time: float = 1.0, eps: float = 0.0) -> t.Dict[str, float]:
    """Terms of the classical Itô formula for a smooth F_n, with the second-order term in the local_time slot.

    local_time holds -int u^2 F_n,xx ds so that it compares directly with the integral of F_x against local
    time.
    """
    first, last = path.grid.left_index(eps), path.grid.left_index(time)
    second_order = float(np.sum(Fn.dxx(path.x[first:last], path.times[first:last]) * path.qv_increments[first:last]))
    sample = ResidualSample.assemble(
        terminal=float(Fn.value(path.value_at(time), time)),
        initial=float(Fn.value(path.value_at(eps), eps)),
        stochastic=ito_stochastic_integral(Fn.dx, path, time, start=eps),
        time=lebesgue_time_integral(Fn.dt, path, time, start=eps),
        local_time=-second_order,
    )
    return sample.model_dump(include={*CHAIN_TERMS, "residual"})


def decreasing_with_one_inversion(values: t.Sequence[float]) -> bool:
    increases = sum(1 for a, b in zip(values, values[1:]) if b > a + 1e-15)
    return increases <= 1


def halving_verdict(
    distances: np.ndarray, max_ratio: float = 0.75, z: float = 2.0, floor: float = DISTANCE_FLOOR
) -> t.Tuple[t.List[t.Optional[float]], bool]:
    """Ratios of mean distances between consecutive columns, and whether every ratio is at most ``max_ratio``.

    ``distances`` holds one row per path and one column per order, in increasing order. A ratio passes
    when it lies below ``max_ratio`` within ``z`` standard errors of the ratio estimate, or when the finer
    mean is below ``floor``. A column that grows from a mean below ``floor`` fails.
    """
    distances = np.atleast_2d(np.asarray(distances, dtype=float))
    n = distances.shape[0]
    means = distances.mean(axis=0)
    ratios, passed = [], True
    for j in range(distances.shape[1] - 1):
        a, b = distances[:, j], distances[:, j + 1]
        if means[j + 1] <= floor:
            ratios.append(None if means[j] <= floor else float(means[j + 1] / means[j]))
            continue
        if means[j] <= floor:
            ratios.append(None)
            passed = False
            continue
        ratio = float(means[j + 1] / means[j])
        stderr = float(np.sqrt(np.var(b - ratio * a, ddof=1) / n) / means[j]) if n > 1 else 0.0
        ratios.append(ratio)
        passed = passed and ratio - z * stderr <= max_ratio
    return ratios, passed


def chain_bandwidth(orders: t.Sequence[int]) -> float:
    """A quarter of the narrowest kernel half-width."""
    return 1.0 / (4 * max(orders))


def mollify_schedule(
    F: WeakDiffFunction, orders: t.Sequence[int], kernel: t.Optional[MollifierKernel] = None
) -> t.List[MollifiedFunction]:
    kernel = kernel or MollifierKernel()
    return [mollify(F, kernel.with_order(order)) for order in orders]


def verify_smooth_ito_chain(
    F: WeakDiffFunction,
    orders: t.Sequence[int],
    path: SamplePath,
    time: float = 1.0,
    eps: float = 0.0,
    config: t.Optional[ResidualConfig] = None,
    certificates: t.Optional[Certificates] = None,
    kernel: t.Optional[MollifierKernel] = None,
    mollified: t.Optional[t.Sequence[MollifiedFunction]] = None,
    max_ratio: float = 0.75,
) -> ChainTable:
    """Distances between the classical Itô terms of each mollified F_n and the extended-formula terms of F.

    Without an explicit bandwidth the reference local-time term uses ``chain_bandwidth(orders)``, so that
    its own smoothing stays below the narrowest kernel. The chain converges when every term's distance
    shrinks by at least ``max_ratio`` per order step; on a single path this is noisy, and a single order
    gives no verdict. Pass ``mollified`` to reuse mollifications across paths.
    """
    if mollified is None:
        mollified = mollify_schedule(F, orders, kernel)
    config = config or ResidualConfig()
    if config.bandwidth is None:
        config = config.model_copy(update={"bandwidth": chain_bandwidth([m.order for m in mollified])})
    reference = ito_residual(F, path, time, eps, config, certificates)
    rows = []
    for Fn in sorted(mollified, key=lambda m: m.order):
        smooth = classical_ito_terms(Fn, path, time, eps)
        distances = {name: abs(smooth[name] - getattr(reference, name)) for name in CHAIN_TERMS}
        rows.append(ChainRow(order=Fn.order, distances=distances, smooth=smooth, consistency_gap=Fn.consistency_gap))

    ratios, converging = {}, None
    if len(rows) > 1:
        verdicts = {
            name: halving_verdict([[row.distances[name] for row in rows]], max_ratio=max_ratio) for name in CHAIN_TERMS
        }
        ratios = {name: verdict[0] for name, verdict in verdicts.items()}
        converging = all(verdict[1] for verdict in verdicts.values())
    return ChainTable(rows=rows, reference=reference, ratios=ratios, converging=converging)
