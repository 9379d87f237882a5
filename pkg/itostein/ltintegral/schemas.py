import enum
import typing as t

import numpy as np
from pydantic import Field, model_validator

from itostein.common import FloatArray, Model
from itostein.utils import union_points

# Vectorized f(x, s) over broadcast arrays.
Evaluator = t.Callable[[np.ndarray, np.ndarray], np.ndarray]

DEFAULT_EPS_SCHEDULE = (2.0**-4, 2.0**-6, 2.0**-8)


class Smoothness(str, enum.Enum):
    elementary = "elementary"
    piecewise_continuous = "piecewise-continuous"
    unknown = "unknown"


def _cell_index(breaks: np.ndarray, values: np.ndarray) -> np.ndarray:
    # Cells are half open on the left: (b_k, b_{k+1}].
    return np.searchsorted(breaks, values, side="left") - 1


class ElementaryFunction(Model):
    """Step function sum of f_kl on the rectangles (x_k, x_{k+1}] x (s_l, s_{l+1}]."""

    x_breaks: FloatArray
    s_breaks: FloatArray
    coefficients: FloatArray

    @model_validator(mode="after")
    def check_breaks(self):
        for name, breaks in (("x", self.x_breaks), ("s", self.s_breaks)):
            if breaks.ndim != 1 or len(breaks) < 2 or np.any(np.diff(breaks) <= 0):
                raise ValueError(f"The {name} breaks must be strictly increasing with at least two points.")
        if self.s_breaks[0] != 0.0 or self.s_breaks[-1] != 1.0:
            raise ValueError("Time breaks must start at 0 and end at 1.")
        if self.coefficients.shape != (len(self.x_breaks) - 1, len(self.s_breaks) - 1):
            raise ValueError(
                f"Expected {(len(self.x_breaks) - 1, len(self.s_breaks) - 1)} coefficients, got {self.coefficients.shape}."
            )
        return self

    @classmethod
    def zeros(cls, x_breaks: t.Sequence[float], s_breaks: t.Sequence[float]) -> "ElementaryFunction":
        return cls(x_breaks=x_breaks, s_breaks=s_breaks, coefficients=np.zeros((len(x_breaks) - 1, len(s_breaks) - 1)))

    def __call__(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
        kx = _cell_index(self.x_breaks, x)
        ks = _cell_index(self.s_breaks, s)
        inside = (kx >= 0) & (kx < len(self.x_breaks) - 1) & (ks >= 0) & (ks < len(self.s_breaks) - 1)
        out = np.zeros(x.shape)
        out[inside] = self.coefficients[kx[inside], ks[inside]]
        return out

    def on_breaks(self, x_breaks: np.ndarray, s_breaks: np.ndarray) -> "ElementaryFunction":
        """The same function described on a finer set of breaks."""
        x_breaks = union_points(self.x_breaks, x_breaks)
        s_breaks = union_points(self.s_breaks, s_breaks)
        x_mid = 0.5 * (x_breaks[1:] + x_breaks[:-1])
        s_mid = 0.5 * (s_breaks[1:] + s_breaks[:-1])
        return ElementaryFunction(x_breaks=x_breaks, s_breaks=s_breaks, coefficients=self(x_mid[:, None], s_mid[None, :]))

    def combine(self, alpha: float, other: "ElementaryFunction", beta: float) -> "ElementaryFunction":
        """alpha * self + beta * other, on the union of both sets of breaks."""
        x_breaks = union_points(self.x_breaks, other.x_breaks)
        s_breaks = union_points(self.s_breaks, other.s_breaks)
        left = self.on_breaks(x_breaks, s_breaks)
        right = other.on_breaks(x_breaks, s_breaks)
        return ElementaryFunction(
            x_breaks=x_breaks, s_breaks=s_breaks, coefficients=alpha * left.coefficients + beta * right.coefficients
        )


class SpaceTimeFunction(Model):
    evaluator: Evaluator = Field(exclude=True)
    half_width: float
    smoothness: Smoothness = Smoothness.unknown
    x_kinks: FloatArray = Field(default_factory=lambda: np.zeros(0))
    s_kinks: FloatArray = Field(default_factory=lambda: np.zeros(0))
    window: t.Optional[t.Tuple[float, float]] = None
    elementary: t.Optional[ElementaryFunction] = None
    name: str = ""

    @model_validator(mode="after")
    def check_support(self):
        if self.half_width <= 0:
            raise ValueError(f"Support half width must be positive, got {self.half_width}.")
        if self.window is not None and not 0 <= self.window[0] <= self.window[1] <= 1:
            raise ValueError(f"Time window {self.window} must lie inside [0, 1].")
        return self

    @classmethod
    def from_elementary(cls, function: ElementaryFunction, name: str = "") -> "SpaceTimeFunction":
        return cls(
            evaluator=function,
            half_width=float(np.max(np.abs(function.x_breaks))),
            smoothness=Smoothness.elementary,
            x_kinks=function.x_breaks,
            s_kinks=function.s_breaks,
            elementary=function,
            name=name,
        )

    def __call__(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
        mask = np.abs(x) <= self.half_width
        if self.window is not None:
            mask &= (s > self.window[0]) & (s <= self.window[1])
        return np.where(mask, self.evaluator(x, s), 0.0)

    def restrict_time(self, lo: float, hi: float) -> "SpaceTimeFunction":
        """f * 1{lo < s <= hi}, with lo and hi recorded as time breaks."""
        if self.window is not None:
            lo, hi = max(lo, self.window[0]), min(hi, self.window[1])
            hi = max(lo, hi)
        if self.elementary is not None:
            refined = self.elementary.on_breaks(np.zeros(0), np.array([lo, hi]))
            s_mid = 0.5 * (refined.s_breaks[1:] + refined.s_breaks[:-1])
            outside = (s_mid <= lo) | (s_mid > hi)
            coefficients = refined.coefficients.copy()
            coefficients[:, outside] = 0.0
            restricted = ElementaryFunction(x_breaks=refined.x_breaks, s_breaks=refined.s_breaks, coefficients=coefficients)
            return SpaceTimeFunction.from_elementary(restricted, name=self.name)
        return self.model_copy(
            update={"window": (lo, hi), "s_kinks": union_points(self.s_kinks, np.array([lo, hi]))},
        )


class HNorm(Model):
    value: float
    squared: float
    exact: bool
    history: t.List[float] = []
    resolution: t.Optional[t.Tuple[int, int]] = None


class Projection(Model):
    function: ElementaryFunction
    distance: t.Optional[float] = None


class RefinementSchedule(Model):
    """Break sets used to approximate a space-time function by elementary ones.

    Level j uses ``x_cells * 2^j`` cells over [-A, A] and ``s_cells * 2^j`` cells over [0, 1], joined with
    the function's kinks and the integration horizon.
    """

    x_cells: int = Field(default=8, ge=1)
    s_cells: int = Field(default=4, ge=1)
    levels: int = Field(default=4, ge=1)
    abs_tol: float = 1e-3
    rel_tol: float = 1e-2


class LocalTimeIntegral(Model):
    value: float
    error: float
    levels: t.List[float]
    converged: bool


class EpsilonExtension(Model):
    eps: t.List[float]
    values: t.List[float]
    limit: float
    error: float
    degenerate: bool
    converged: bool
