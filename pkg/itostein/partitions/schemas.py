import enum
import typing as t

import numpy as np
from pydantic import Field, model_validator

from itostein.common import FloatArray, Model


class PartitionKind(str, enum.Enum):
    uniform = "uniform"
    geometric_dyadic = "geometric-dyadic"
    custom = "custom"


class Partition(Model):
    points: FloatArray

    @model_validator(mode="after")
    def check_points(self):
        if self.points.ndim != 1 or len(self.points) < 2:
            raise ValueError("A partition needs at least two points.")
        if self.points[0] != 0.0 or self.points[-1] != 1.0:
            raise ValueError("A partition of [0, 1] must contain 0 and 1.")
        if np.any(np.diff(self.points) <= 0):
            raise ValueError("Partition points must be strictly increasing.")
        return self

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.points)))

    @property
    def ratios(self) -> np.ndarray:
        """Consecutive-point ratios t_{i+1} / t_i over the points t_i > 0."""
        return self.points[2:] / self.points[1:-1]

    @property
    def max_ratio(self) -> float:
        ratios = self.ratios
        return float(np.max(ratios)) if len(ratios) else 1.0


class PartitionSequence(Model):
    family: t.List[Partition]
    kind: PartitionKind = PartitionKind.custom
    ratio_constant: float = 0.0
    mesh_profile: FloatArray = Field(default_factory=lambda: np.zeros(0))

    @model_validator(mode="after")
    def summarize(self):
        if not self.family:
            raise ValueError("A partition sequence needs at least one partition.")
        self.ratio_constant = max(p.max_ratio for p in self.family)
        self.mesh_profile = np.array([p.mesh for p in self.family])
        return self

    @property
    def finest(self) -> Partition:
        return self.family[-1]


class ValidationReport(Model):
    kind: PartitionKind
    ratio_constant: float
    cap: float
    mesh_profile: FloatArray
    mesh_tolerance: float
    mesh_vanishing: bool
