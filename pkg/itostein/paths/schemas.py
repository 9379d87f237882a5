import enum
import logging
import typing as t

import numpy as np
from pydantic import Field, model_validator

from itostein.common import GRID_ATOL, FloatArray, Model
from itostein.errors import NonpositiveRho, OffGridTime
from itostein.utils import left_indices, match_indices

logger = logging.getLogger(__name__)

# Bounded functional of (t, Brownian history up to t).
Functional = t.Callable[[float, np.ndarray], float]


class GridProfile(str, enum.Enum):
    uniform = "uniform"
    geometric = "geometric"


class TimeGrid(Model):
    points: FloatArray
    profile: GridProfile = GridProfile.uniform

    @model_validator(mode="after")
    def check_points(self):
        if self.points.ndim != 1 or len(self.points) < 2:
            raise ValueError("A time grid needs at least two points.")
        if self.points[0] != 0.0 or self.points[-1] != 1.0:
            raise ValueError("A time grid must start at 0 and end at 1.")
        if np.any(np.diff(self.points) <= 0):
            raise ValueError("Time grid points must be strictly increasing.")
        return self

    @classmethod
    def uniform(cls, n_steps: int) -> "TimeGrid":
        if n_steps < 1:
            raise ValueError(f"A grid needs at least one step, got {n_steps}.")
        return cls(points=np.linspace(0.0, 1.0, n_steps + 1), profile=GridProfile.uniform)

    @classmethod
    def geometric(cls, n_steps: int, growth: float = 1.001) -> "TimeGrid":
        """Steps growing by a constant factor, finest near 0."""
        if n_steps < 1:
            raise ValueError(f"A grid needs at least one step, got {n_steps}.")
        if growth <= 0:
            raise ValueError(f"Growth factor must be positive, got {growth}.")
        steps = growth ** np.arange(n_steps)
        points = np.concatenate(([0.0], np.cumsum(steps) / np.sum(steps)))
        points[-1] = 1.0
        return cls(points=points, profile=GridProfile.geometric)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def n_steps(self) -> int:
        return len(self.points) - 1

    @property
    def mesh(self) -> float:
        return float(np.max(self.steps))

    def index_of(self, time: float) -> int:
        index, found = match_indices(self.points, np.array([time]))
        if not found[0]:
            raise OffGridTime(f"Time {time} is not a grid point.")
        return int(index[0])

    def left_index(self, time: float) -> int:
        return int(left_indices(self.points, np.array([time]), GRID_ATOL)[0])


class IntegrandKind(str, enum.Enum):
    constant = "constant"
    bounded_sine = "bounded-sine"
    custom = "custom"


class IntegrandSpec(Model):
    kind: IntegrandKind
    rho: float
    upper: float
    sigma: float = 1.0
    amplitude: float = 0.0
    functional: t.Optional[Functional] = Field(default=None, exclude=True)
    name: str = ""

    @model_validator(mode="after")
    def check_bounds(self):
        if self.upper < self.rho:
            raise ValueError(f"Upper bound {self.upper} is below the lower bound {self.rho}.")
        if self.kind == IntegrandKind.custom and self.functional is None:
            raise ValueError("A custom integrand needs a functional.")
        return self

    @classmethod
    def constant(cls, sigma: float) -> "IntegrandSpec":
        if sigma == 0:
            raise NonpositiveRho("A constant integrand must be nonzero.")
        return cls(kind=IntegrandKind.constant, sigma=sigma, rho=abs(sigma), upper=abs(sigma), name=f"constant({sigma})")

    @classmethod
    def bounded_sine(cls, rho: float, amplitude: float) -> "IntegrandSpec":
        """u_t = rho + amplitude * (1 + sin(W_t)) / 2, with values in [rho, rho + amplitude]."""
        if rho <= 0:
            raise NonpositiveRho(f"Lower bound must be positive, got {rho}.")
        if amplitude < 0:
            raise ValueError(f"Amplitude must be nonnegative, got {amplitude}.")
        return cls(
            kind=IntegrandKind.bounded_sine,
            rho=rho,
            amplitude=amplitude,
            upper=rho + amplitude,
            name=f"bounded-sine({rho}, {amplitude})",
        )

    @classmethod
    def custom(cls, functional: Functional, rho: float, upper: float, name: str = "custom") -> "IntegrandSpec":
        if rho <= 0:
            raise NonpositiveRho(f"Lower bound must be positive, got {rho}.")
        logger.warning("Integrand %s is user supplied; its integrability hypotheses are not verified.", name)
        return cls(kind=IntegrandKind.custom, functional=functional, rho=rho, upper=upper, name=name)

    @property
    def spec_id(self) -> int:
        return list(IntegrandKind).index(self.kind)

    @property
    def verified(self) -> bool:
        return self.kind != IntegrandKind.custom

    def evaluate(self, times: np.ndarray, w: np.ndarray) -> np.ndarray:
        match self.kind:
            case IntegrandKind.constant:
                return np.full(len(times), self.sigma)
            case IntegrandKind.bounded_sine:
                return self.rho + self.amplitude * (1.0 + np.sin(w)) / 2.0
            case IntegrandKind.custom:
                return np.array([self.functional(float(times[i]), w[: i + 1]) for i in range(len(times))], dtype=float)


class SamplePath(Model):
    grid: TimeGrid
    w: FloatArray
    u: FloatArray
    x: FloatArray
    qv_increments: FloatArray
    seed: int

    @model_validator(mode="after")
    def check_shapes(self):
        n_points = len(self.grid.points)
        if not (len(self.w) == len(self.u) == len(self.x) == n_points):
            raise ValueError("Path values must have one entry per grid point.")
        if len(self.qv_increments) != n_points - 1:
            raise ValueError("Quadratic-variation increments must have one entry per step.")
        if self.x[0] != 0.0 or self.w[0] != 0.0:
            raise ValueError("Paths must start at 0.")
        return self

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    @property
    def quadratic_variation(self) -> np.ndarray:
        """Running sum of the quadratic-variation increments, one value per grid point."""
        return np.concatenate(([0.0], np.cumsum(self.qv_increments)))

    def value_at(self, time: float) -> float:
        return float(self.x[self.grid.left_index(time)])


class DensityEstimate(Model):
    t: float
    n_paths: int
    edges: FloatArray
    density: FloatArray
    max_density: float
    scaled_peak: float
