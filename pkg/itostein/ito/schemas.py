import enum
import pathlib
import typing as t

import numpy as np
from pydantic import Field, model_validator

from itostein.common import FloatArray, Model
from itostein.ltintegral.schemas import DEFAULT_EPS_SCHEDULE, Evaluator, RefinementSchedule, Smoothness, SpaceTimeFunction
from itostein.utils import write_rows

RESIDUAL_TERMS = ("terminal", "initial", "stochastic", "time", "local_time", "residual")


class WeakDiffFunction(Model):
    """F(x, t) with its first-order derivatives, supported in |x| <= half_width."""

    value: Evaluator = Field(exclude=True)
    dx: Evaluator = Field(exclude=True)
    dt: Evaluator = Field(exclude=True)
    half_width: float
    x_kinks: FloatArray = Field(default_factory=lambda: np.zeros(0))
    s_kinks: FloatArray = Field(default_factory=lambda: np.zeros(0))
    time_dependent: bool = True
    name: str = ""

    def __call__(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        return self.value(x, s)

    def space_derivative(self) -> SpaceTimeFunction:
        return SpaceTimeFunction(
            evaluator=self.dx,
            half_width=self.half_width,
            smoothness=Smoothness.piecewise_continuous,
            x_kinks=self.x_kinks,
            s_kinks=self.s_kinks,
            name=f"d{self.name}/dx",
        )


class MollifiedFunction(WeakDiffFunction):
    dxx: Evaluator = Field(exclude=True)
    order: int
    consistency_gap: float


class Certificates(Model):
    """Integrals of |F_t| s^-1/2 and F_x^2 s^-1/2 over the support box.

    ``derivative_norm`` is the weighted norm of F_x, or None when it diverges and the local-time term needs
    the eps -> 0 extension.
    """

    time_integral: float
    space_integral: float
    time_history: t.List[float]
    space_history: t.List[float]
    stable: bool
    derivative_norm: t.Optional[float] = None


class ResidualForm(str, enum.Enum):
    local_time = "local-time"
    covariation = "covariation"


class ResidualConfig(Model):
    schedule: RefinementSchedule = RefinementSchedule()
    eps_schedule: t.List[float] = list(DEFAULT_EPS_SCHEDULE)
    bandwidth: t.Optional[float] = None
    strict: bool = False


class ResidualSample(Model):
    """Breakdown of one path's residual.

    residual = terminal - initial - stochastic - time + local_time / 2, where local_time is the integral
    of F_x against local time (equal to minus the covariation [F_x(X), X] in the covariation form).
    """

    terminal: float
    initial: float
    stochastic: float
    time: float
    local_time: float
    residual: float
    eps: float = 0.0
    converged: bool = True

    @classmethod
    def assemble(
        cls, terminal: float, initial: float, stochastic: float, time: float, local_time: float, **kwargs
    ) -> "ResidualSample":
        return cls(
            terminal=terminal,
            initial=initial,
            stochastic=stochastic,
            time=time,
            local_time=local_time,
            residual=terminal - initial - stochastic - time + 0.5 * local_time,
            **kwargs,
        )

    def recombined(self) -> float:
        return self.terminal - self.initial - self.stochastic - self.time + 0.5 * self.local_time


class CovariationResult(Model):
    meshes: FloatArray
    values: FloatArray
    limit: float
    error: float


class ItoReport(Model):
    experiment: str
    function: str
    form: ResidualForm = ResidualForm.local_time
    n_paths: int
    mean: float
    stderr: float
    max_abs: float
    terms: t.Dict[str, FloatArray]

    @model_validator(mode="after")
    def check_terms(self):
        missing = [name for name in RESIDUAL_TERMS if name not in self.terms]
        if missing:
            raise ValueError(f"Report is missing terms {missing}.")
        return self

    @classmethod
    def from_samples(
        cls, samples: t.Sequence[ResidualSample], experiment: str, function: str, form: ResidualForm = ResidualForm.local_time
    ) -> "ItoReport":
        terms = {name: np.array([getattr(s, name) for s in samples], dtype=float) for name in RESIDUAL_TERMS}
        residuals = terms["residual"]
        n = len(residuals)
        return cls(
            experiment=experiment,
            function=function,
            form=form,
            n_paths=n,
            mean=float(np.mean(residuals)) if n else 0.0,
            stderr=float(np.std(residuals, ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
            max_abs=float(np.max(np.abs(residuals))) if n else 0.0,
            terms=terms,
        )

    def write_csv(self, destination: pathlib.Path):
        columns = [self.terms[name] for name in RESIDUAL_TERMS]
        write_rows(destination, ["path", *RESIDUAL_TERMS], ([i, *row] for i, row in enumerate(zip(*columns))))

    def write(self, destination: pathlib.Path):
        destination = pathlib.Path(destination)
        destination.parent.mkdir(parents=True, exist_ok=True)
        destination.write_text(self.model_dump_json(indent=2))


class ChainRow(Model):
    order: int
    distances: t.Dict[str, float]
    smooth: t.Dict[str, float]
    consistency_gap: float


class ChainTable(Model):
    rows: t.List[ChainRow]
    reference: ResidualSample
    ratios: t.Dict[str, t.List[t.Optional[float]]] = {}
    converging: t.Optional[bool]
