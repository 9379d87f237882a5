import numpy as np
from pydantic import model_validator

from itostein.common import FloatArray, Model
from itostein.errors import GridMismatch
from itostein.utils import match_indices


class SpaceGrid(Model):
    levels: FloatArray
    spacing: float = 0.0

    @model_validator(mode="after")
    def check_levels(self):
        if self.levels.ndim != 1 or len(self.levels) < 2:
            raise ValueError("A space grid needs at least two levels.")
        gaps = np.diff(self.levels)
        if np.any(gaps <= 0):
            raise ValueError("Space levels must be strictly increasing.")
        self.spacing = float(np.max(gaps))
        return self

    @classmethod
    def symmetric(cls, half_width: float, spacing: float) -> "SpaceGrid":
        """Uniform levels over [-half_width, half_width] with at most ``spacing`` between them."""
        if half_width <= 0 or spacing <= 0:
            raise ValueError("Half width and spacing must be positive.")
        cells = max(1, int(np.ceil(2 * half_width / spacing - 1e-9)))
        return cls(levels=np.linspace(-half_width, half_width, cells + 1))

    @property
    def cell_weights(self) -> np.ndarray:
        """Width of the dual cell around each level, used for Riemann sums over space."""
        edges = np.concatenate(([self.levels[0]], 0.5 * (self.levels[1:] + self.levels[:-1]), [self.levels[-1]]))
        return np.diff(edges)


class LocalTimeField(Model):
    """Local time L[l][k] of one path at times[l] and space.levels[k]."""

    space: SpaceGrid
    times: FloatArray
    values: FloatArray
    bandwidth: float
    seed: int

    @model_validator(mode="after")
    def check_shape(self):
        if self.values.shape != (len(self.times), len(self.space.levels)):
            raise ValueError("Local-time values must have one row per time and one column per level.")
        return self

    def at(self, level: float, time: float) -> float:
        k, found_level = match_indices(self.space.levels, np.array([level]))
        l, found_time = match_indices(self.times, np.array([time]))
        if not (found_level[0] and found_time[0]):
            raise GridMismatch(f"({level}, {time}) is not a node of the local-time field.")
        return float(self.values[l[0], k[0]])
