"""Per-path records and Monte-Carlo summaries for every experiment kind.

Each kind prepares its path-independent state once per worker, turns one simulated path into a flat record
of floats, and reduces the records (in path-index order) into a summary and a verdict.
"""

import logging
import math
import typing as t

import numpy as np
from scipy import stats

from itostein.common import SQRT_2_OVER_PI
from itostein.harness.schemas import ExperimentConfig, ExperimentKind, ExperimentResult, McSummary
from itostein.harness.seeding import split_seed
from itostein.ito import catalog
from itostein.ito.ops import (
    CHAIN_TERMS,
    certify,
    chain_bandwidth,
    covariation_residual,
    halving_verdict,
    ito_residual,
    mollify_schedule,
    quadratic_covariation,
    verify_smooth_ito_chain,
)
from itostein.ito.schemas import RESIDUAL_TERMS, ItoReport, ResidualForm, ResidualSample
from itostein.localtime.ops import default_bandwidth, estimate_local_time_occupation, estimate_local_time_tanaka
from itostein.localtime.schemas import SpaceGrid
from itostein.ltintegral.ops import h_norm, integrate_elementary, integrate_wrt_local_time
from itostein.ltintegral.schemas import ElementaryFunction, SpaceTimeFunction
from itostein.partitions.ops import make_partition_sequence
from itostein.partitions.schemas import PartitionKind
from itostein.paths.ops import density_from_samples, generator
from itostein.paths.schemas import IntegrandKind, SamplePath
from itostein.utils import clip_points, union_points

logger = logging.getLogger(__name__)

Record = t.Dict[str, float]
State = t.Dict[str, t.Any]

# Path index reserved for the stream that draws the norm-bound function family.
FAMILY_STREAM = 2**62

# Monte-Carlo means below this are zero up to round-off.
ROUNDOFF = 1e-12


class Experiment(t.NamedTuple):
    prepare: t.Callable[[ExperimentConfig], State]
    record: t.Callable[[ExperimentConfig, State, SamplePath], Record]
    summarize: t.Callable[[ExperimentConfig, t.List[Record]], ExperimentResult]


def _column(records: t.List[Record], key: str) -> np.ndarray:
    return np.array([r[key] for r in records], dtype=float)


def _result(config: ExperimentConfig, summary: McSummary, passed: bool, **details) -> ExperimentResult:
    report = details.pop("report", None)
    return ExperimentResult(config=config, summary=summary, passed=bool(passed), details=details, report=report)


def _centered(summary: McSummary, z: float = 2.0) -> bool:
    return abs(summary.mean) <= z * summary.stderr + ROUNDOFF


def _bandwidth(config: ExperimentConfig, mesh: float, spacing: float = 0.0) -> float:
    return config.space.bandwidth or default_bandwidth(mesh, spacing)


# density-bound


def _density_prepare(config: ExperimentConfig) -> State:
    grid = config.grid.build()
    return {"indices": [grid.left_index(time) for time in config.times]}


def _density_record(config: ExperimentConfig, state: State, path: SamplePath) -> Record:
    return {f"x@{time:g}": float(path.x[i]) for time, i in zip(config.times, state["indices"])}


def _density_summarize(config: ExperimentConfig, records: t.List[Record]) -> ExperimentResult:
    estimates = [density_from_samples(_column(records, f"x@{time:g}"), time, config.bins) for time in config.times]
    peaks = [e.scaled_peak for e in estimates]
    rows = [{"t": e.t, "max_density": e.max_density, "scaled_peak": e.scaled_peak} for e in estimates]
    summary = McSummary.from_samples(peaks, rows)
    spread = (summary.max - summary.min) / summary.mean
    return _result(config, summary, spread <= config.tolerance, spread=spread)


# local-time-mean


def _local_time_prepare(config: ExperimentConfig) -> State:
    grid = config.grid.build()
    space = SpaceGrid.symmetric(config.space.half_width, config.space.spacing)
    return {"space": space, "bandwidth": _bandwidth(config, grid.mesh, space.spacing)}


def _local_time_record(config: ExperimentConfig, state: State, path: SamplePath) -> Record:
    field = estimate_local_time_occupation(path, state["space"], [config.horizon], state["bandwidth"])
    return {
        "occupation": field.at(config.level, config.horizon),
        "tanaka": estimate_local_time_tanaka(path, config.level, config.horizon),
    }


def _gaussian_local_time_mean(sigma: float, level: float, time: float) -> float:
    """E|X_t - a| - |a| for X_t ~ N(0, sigma^2 t)."""
    scale = abs(sigma) * math.sqrt(time)
    z = level / scale
    return float(scale * SQRT_2_OVER_PI * math.exp(-0.5 * z * z) + level * (2 * stats.norm.cdf(z) - 1) - abs(level))


def _local_time_summarize(config: ExperimentConfig, records: t.List[Record]) -> ExperimentResult:
    occupation, tanaka = _column(records, "occupation"), _column(records, "tanaka")
    summary = McSummary.from_samples(occupation)
    expected = config.expected
    if expected is None:
        if config.integrand.kind == IntegrandKind.constant:
            expected = _gaussian_local_time_mean(config.integrand.sigma, config.level, config.horizon)
        else:
            expected = float(np.mean(tanaka))
    relative_error = abs(summary.mean - expected) / abs(expected)
    correlation = float(np.corrcoef(occupation, tanaka)[0, 1]) if len(records) > 1 else 1.0
    return _result(
        config,
        summary,
        relative_error <= config.tolerance,
        expected=expected,
        relative_error=relative_error,
        tanaka_mean=float(np.mean(tanaka)),
        correlation=correlation,
    )


# bouleau-yor: the integral of an x-only step function against local time equals minus the covariation.


def _bouleau_yor_prepare(config: ExperimentConfig) -> State:
    half_width = config.space.half_width
    step = ElementaryFunction(x_breaks=[-half_width, 0.0, half_width], s_breaks=[0.0, 1.0], coefficients=[[-1.0], [1.0]])
    return {
        "function": SpaceTimeFunction.from_elementary(step, name="sign"),
        "sign": catalog.sign(half_width),
        "sequence": make_partition_sequence(PartitionKind.uniform, config.partitions.depth),
    }


def _bouleau_yor_record(config: ExperimentConfig, state: State, path: SamplePath) -> Record:
    integral = integrate_wrt_local_time(
        state["function"], path, config.horizon, bandwidth=config.space.bandwidth, certify=False
    ).value
    covariation = quadratic_covariation(
        state["sign"], path, state["sequence"], config.horizon, cap=config.partitions.cap
    ).limit
    return {"integral": integral, "covariation": -covariation, "difference": integral + covariation}


def _bouleau_yor_summarize(config: ExperimentConfig, records: t.List[Record]) -> ExperimentResult:
    summary = McSummary.from_samples(_column(records, "difference"))
    integral_mean = float(np.mean(_column(records, "integral")))
    covariation_mean = float(np.mean(_column(records, "covariation")))
    passed = _centered(summary)
    oracle = config.expected
    if oracle is None and config.integrand.kind == IntegrandKind.constant:
        oracle = -2 * _gaussian_local_time_mean(config.integrand.sigma, 0.0, config.horizon)
    if oracle is not None:
        passed = passed and abs(covariation_mean - oracle) <= config.tolerance * abs(oracle)
    return _result(config, summary, passed, integral_mean=integral_mean, covariation_mean=covariation_mean, oracle=oracle)


# norm-bound: E|integral of f| against the norm of f over a random family of elementary functions.


def _norm_family(config: ExperimentConfig) -> t.Tuple[t.List[ElementaryFunction], np.ndarray]:
    rng = generator(split_seed(config.master_seed, FAMILY_STREAM))
    half_width = min(1.5, config.space.half_width)
    x_breaks = np.linspace(-half_width, half_width, 7)
    s_breaks = np.linspace(0.0, 1.0, 5)
    family, norms = [], []
    for _ in range(config.n_functions):
        shape = ElementaryFunction(x_breaks=x_breaks, s_breaks=s_breaks, coefficients=rng.standard_normal((6, 4)))
        target = 10.0 ** rng.uniform(-1.0, 1.0)
        scaled = shape.coefficients * target / h_norm(SpaceTimeFunction.from_elementary(shape)).value
        function = ElementaryFunction(x_breaks=x_breaks, s_breaks=s_breaks, coefficients=scaled)
        family.append(function)
        norms.append(h_norm(SpaceTimeFunction.from_elementary(function)).value)
    return family, np.array(norms)


def _norm_prepare(config: ExperimentConfig) -> State:
    family, norms = _norm_family(config)
    grid = config.grid.build()
    bandwidth = _bandwidth(config, grid.mesh)
    x_breaks = family[0].x_breaks
    cells = max(1, math.ceil((x_breaks[-1] - x_breaks[0]) / bandwidth - 1e-9))
    levels = union_points(np.linspace(x_breaks[0], x_breaks[-1], cells + 1), x_breaks)
    return {
        "family": family,
        "norms": norms,
        "space": SpaceGrid(levels=levels),
        "times": clip_points(family[0].s_breaks, config.horizon),
        "bandwidth": bandwidth,
    }


def _norm_record(config: ExperimentConfig, state: State, path: SamplePath) -> Record:
    field = estimate_local_time_occupation(path, state["space"], state["times"], state["bandwidth"])
    return {f"I_{j}": integrate_elementary(f, field, config.horizon) for j, f in enumerate(state["family"])}


def _norm_summarize(config: ExperimentConfig, records: t.List[Record]) -> ExperimentResult:
    _, norms = _norm_family(config)
    mean_abs = np.array([np.mean(np.abs(_column(records, f"I_{j}"))) for j in range(config.n_functions)])
    fit = stats.linregress(np.log(norms), np.log(mean_abs))
    ratios = mean_abs / norms
    rows = [{"norm": float(n), "mean_abs": float(m), "ratio": float(r)} for n, m, r in zip(norms, mean_abs, ratios)]
    summary = McSummary.from_samples(ratios, rows)
    return _result(
        config,
        summary,
        abs(fit.slope - 1.0) <= config.tolerance,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        max_ratio=float(np.max(ratios)),
    )


# ito-residual


def _residual_prepare(config: ExperimentConfig) -> State:
    F = catalog.get(config.function)
    state = {"F": F}
    if config.form == ResidualForm.covariation:
        state["sequence"] = make_partition_sequence(PartitionKind.uniform, config.partitions.depth)
    else:
        state["certificates"] = certify(F)
    return state


def _residual_record(config: ExperimentConfig, state: State, path: SamplePath) -> Record:
    if config.form == ResidualForm.covariation:
        sample = covariation_residual(state["F"], path, state["sequence"], config.horizon, cap=config.partitions.cap)
    else:
        sample = ito_residual(state["F"], path, config.horizon, config.eps, config.residual, state["certificates"])
    return {**sample.model_dump(include=set(RESIDUAL_TERMS)), "converged": float(sample.converged)}


def _residual_summarize(config: ExperimentConfig, records: t.List[Record]) -> ExperimentResult:
    samples = [ResidualSample(**{name: r[name] for name in RESIDUAL_TERMS}) for r in records]
    report = ItoReport.from_samples(samples, experiment=config.name, function=config.function, form=config.form)
    summary = McSummary.from_samples(report.terms["residual"])
    unconverged = int(len(records) - np.sum(_column(records, "converged")))
    passed = abs(summary.mean) <= config.tolerance and _centered(summary)
    return _result(config, summary, passed, unconverged=unconverged, report=report)


# smooth-chain


def _chain_prepare(config: ExperimentConfig) -> State:
    F = catalog.get(config.function)
    bandwidth = config.residual.bandwidth or chain_bandwidth(config.kernel_orders)
    mesh = config.grid.build().mesh
    if math.sqrt(mesh) > bandwidth:
        logger.warning(
            "Mesh %g is coarse for the local-time bandwidth %g; distances at the highest orders will level off.",
            mesh,
            bandwidth,
        )
    return {
        "F": F,
        "certificates": certify(F),
        "mollified": mollify_schedule(F, config.kernel_orders),
        "residual": config.residual.model_copy(update={"bandwidth": bandwidth}),
    }


def _chain_record(config: ExperimentConfig, state: State, path: SamplePath) -> Record:
    table = verify_smooth_ito_chain(
        state["F"],
        config.kernel_orders,
        path,
        config.horizon,
        config.eps,
        state["residual"],
        state["certificates"],
        mollified=state["mollified"],
    )
    record = {f"{name}@{row.order}": row.distances[name] for row in table.rows for name in CHAIN_TERMS}
    record["residual"] = table.reference.residual
    return record


def _chain_summarize(config: ExperimentConfig, records: t.List[Record]) -> ExperimentResult:
    """Mean distances per order. Every term's distance must halve per order step, up to the relative tolerance."""
    orders = sorted(config.kernel_orders)
    distances = {name: np.column_stack([_column(records, f"{name}@{n}") for n in orders]) for name in CHAIN_TERMS}
    rows = [{"order": n, **{name: float(np.mean(d[:, j])) for name, d in distances.items()}} for j, n in enumerate(orders)]
    summary = McSummary.from_samples(_column(records, "residual"), rows)
    if len(orders) == 1:
        return _result(config, summary, True, ratios=None, converging=None)

    max_ratio = 0.5 * (1 + config.tolerance)
    verdicts = {name: halving_verdict(d, max_ratio=max_ratio) for name, d in distances.items()}
    converging = {name: verdict[1] for name, verdict in verdicts.items()}
    ratios = {name: verdict[0] for name, verdict in verdicts.items()}
    return _result(config, summary, all(converging.values()), ratios=ratios, converging=converging)


# covariation-partitions


def _covariation_prepare(config: ExperimentConfig) -> State:
    return {
        "functions": {name: catalog.get_space_time(name, half_width=config.space.half_width) for name in config.functions},
        "sequences": {kind: make_partition_sequence(kind, config.partitions.depth) for kind in config.partitions.kinds},
    }


def _covariation_record(config: ExperimentConfig, state: State, path: SamplePath) -> Record:
    return {
        f"{name}@{kind.value}": quadratic_covariation(f, path, sequence, config.horizon, cap=config.partitions.cap).limit
        for name, f in state["functions"].items()
        for kind, sequence in state["sequences"].items()
    }


def _covariation_summarize(config: ExperimentConfig, records: t.List[Record]) -> ExperimentResult:
    kinds = [kind.value for kind in config.partitions.kinds]
    rows, spreads = [], {}
    for name in config.functions:
        means = {kind: float(np.mean(_column(records, f"{name}@{kind}"))) for kind in kinds}
        scale = max(abs(m) for m in means.values())
        spreads[name] = (max(means.values()) - min(means.values())) / scale if scale > 0 else 0.0
        rows.append({"function": name, **means, "spread": spreads[name]})
    first = config.functions[0]
    differences = _column(records, f"{first}@{kinds[0]}") - _column(records, f"{first}@{kinds[-1]}")
    summary = McSummary.from_samples(differences, rows)
    return _result(config, summary, all(s <= config.tolerance for s in spreads.values()), spreads=spreads)


EXPERIMENTS: t.Dict[ExperimentKind, Experiment] = {
    ExperimentKind.density_bound: Experiment(_density_prepare, _density_record, _density_summarize),
    ExperimentKind.local_time_mean: Experiment(_local_time_prepare, _local_time_record, _local_time_summarize),
    ExperimentKind.bouleau_yor: Experiment(_bouleau_yor_prepare, _bouleau_yor_record, _bouleau_yor_summarize),
    ExperimentKind.norm_bound: Experiment(_norm_prepare, _norm_record, _norm_summarize),
    ExperimentKind.ito_residual: Experiment(_residual_prepare, _residual_record, _residual_summarize),
    ExperimentKind.smooth_chain: Experiment(_chain_prepare, _chain_record, _chain_summarize),
    ExperimentKind.covariation_partitions: Experiment(_covariation_prepare, _covariation_record, _covariation_summarize),
}
