import enum
import pathlib
import typing as t

import numpy as np
import yaml
from pydantic import Field, ValidationError, model_validator

from itostein.common import Model
from itostein.errors import ConfigInvalid, EmptySample
from itostein.ito.schemas import ItoReport, ResidualConfig, ResidualForm
from itostein.partitions.schemas import PartitionKind
from itostein.paths.schemas import GridProfile, IntegrandKind, IntegrandSpec, TimeGrid


class ExperimentKind(str, enum.Enum):
    density_bound = "density-bound"
    local_time_mean = "local-time-mean"
    bouleau_yor = "bouleau-yor"
    norm_bound = "norm-bound"
    ito_residual = "ito-residual"
    smooth_chain = "smooth-chain"
    covariation_partitions = "covariation-partitions"


DEFAULT_TOLERANCES = {
    ExperimentKind.density_bound: 0.10,
    ExperimentKind.local_time_mean: 0.05,
    ExperimentKind.bouleau_yor: 0.07,
    ExperimentKind.norm_bound: 0.15,
    ExperimentKind.ito_residual: 0.05,
    ExperimentKind.smooth_chain: 0.5,
    ExperimentKind.covariation_partitions: 0.03,
}


_NESTED_OVERRIDES = {
    "n_steps": ("grid", "n_steps"),
    "depth": ("partitions", "depth"),
    "half_width": ("space", "half_width"),
}


class IntegrandConfig(Model):
    kind: IntegrandKind = IntegrandKind.constant
    sigma: float = 1.0
    rho: float = 1.0
    amplitude: float = 1.0

    @model_validator(mode="after")
    def check_kind(self):
        if self.kind == IntegrandKind.custom:
            raise ValueError("Custom integrands are registered in code, not in configuration files.")
        return self

    def build(self) -> IntegrandSpec:
        if self.kind == IntegrandKind.constant:
            return IntegrandSpec.constant(self.sigma)
        return IntegrandSpec.bounded_sine(self.rho, self.amplitude)


class GridConfig(Model):
    n_steps: int = Field(default=1000, ge=1)
    profile: GridProfile = GridProfile.uniform
    growth: float = Field(default=1.001, gt=0)

    def build(self) -> TimeGrid:
        if self.profile == GridProfile.uniform:
            return TimeGrid.uniform(self.n_steps)
        return TimeGrid.geometric(self.n_steps, self.growth)


class PartitionConfig(Model):
    kinds: t.List[PartitionKind] = [PartitionKind.uniform, PartitionKind.geometric_dyadic]
    depth: int = Field(default=10, ge=1)
    cap: float = 4.0

    @model_validator(mode="after")
    def check_kinds(self):
        if not self.kinds or PartitionKind.custom in self.kinds:
            raise ValueError("Partition kinds must be a nonempty list of generated kinds.")
        return self


class SpaceConfig(Model):
    half_width: float = Field(default=3.0, gt=0)
    spacing: float = Field(default=0.01, gt=0)
    bandwidth: t.Optional[float] = Field(default=None, gt=0)


class ExperimentConfig(Model):
    kind: ExperimentKind
    name: str = ""
    n_paths: int = Field(default=1000, ge=0)
    master_seed: int = Field(default=0, ge=0, lt=2**64)
    horizon: float = Field(default=1.0, gt=0, le=1)
    integrand: IntegrandConfig = IntegrandConfig()
    grid: GridConfig = GridConfig()
    partitions: PartitionConfig = PartitionConfig()
    space: SpaceConfig = SpaceConfig()
    residual: ResidualConfig = ResidualConfig()
    function: str = "capped-abs"
    form: ResidualForm = ResidualForm.local_time
    functions: t.List[str] = ["identity", "sign"]
    times: t.List[float] = [0.04, 0.25, 1.0]
    bins: int = Field(default=40, ge=1)
    level: float = 0.0
    eps: float = Field(default=0.0, ge=0)
    kernel_orders: t.List[int] = [8, 16, 32, 64]
    n_functions: int = Field(default=20, ge=2)
    expected: t.Optional[float] = None
    tolerance: t.Optional[float] = Field(default=None, ge=0)
    # Execution settings, left out of the snapshot so outputs do not depend on them.
    workers: int = Field(default=1, ge=1, exclude=True)
    output_dir: t.Optional[pathlib.Path] = Field(default=None, exclude=True)

    @model_validator(mode="after")
    def check_consistency(self):
        if not self.name:
            self.name = self.kind.value
        if self.tolerance is None:
            self.tolerance = DEFAULT_TOLERANCES[self.kind]
        if self.eps >= self.horizon:
            raise ValueError(f"eps={self.eps} must be below the horizon {self.horizon}.")
        if any(not 0 < time <= 1 for time in self.times):
            raise ValueError(f"Density times {self.times} must lie in (0, 1].")
        if not self.kernel_orders or any(order < 1 for order in self.kernel_orders):
            raise ValueError("Kernel orders must be a nonempty list of positive integers.")
        uses_partitions = self.kind in (ExperimentKind.bouleau_yor, ExperimentKind.covariation_partitions) or (
            self.kind == ExperimentKind.ito_residual and self.form == ResidualForm.covariation
        )
        if uses_partitions and self.grid.profile == GridProfile.uniform and 2.0**-self.partitions.depth < 1 / self.grid.n_steps:
            raise ValueError(
                f"Partition depth {self.partitions.depth} is finer than the {self.grid.n_steps}-step simulation grid."
            )
        return self

    @classmethod
    def parse_yaml(cls, path: pathlib.Path) -> "ExperimentConfig":
        with pathlib.Path(path).open() as f:
            raw = yaml.safe_load(f) or {}
        return cls.validated(raw)

    @classmethod
    def validated(cls, raw: t.Dict[str, t.Any]) -> "ExperimentConfig":
        try:
            return cls.model_validate(raw)
        except ValidationError as e:
            raise ConfigInvalid(str(e)) from e

    def with_overrides(self, **overrides: t.Any) -> "ExperimentConfig":
        """A validated copy with the given non-None settings replaced."""
        data = self.model_dump()
        data.update({"workers": self.workers, "output_dir": self.output_dir})
        for key, value in overrides.items():
            if value is None:
                continue
            if key in _NESTED_OVERRIDES:
                section, field = _NESTED_OVERRIDES[key]
                data[section][field] = value
            else:
                data[key] = value
        return self.validated(data)

    def snapshot(self) -> t.Dict[str, t.Any]:
        return self.model_dump(mode="json")


class McSummary(Model):
    n: int
    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    max: float
    min: float
    rows: t.List[t.Dict[str, t.Any]] = []

    @classmethod
    def from_samples(cls, samples: t.Sequence[float], rows: t.Optional[t.List[t.Dict[str, t.Any]]] = None) -> "McSummary":
        """Mean, standard error and 95% normal interval of samples taken in path-index order."""
        values = np.asarray(samples, dtype=float)
        if len(values) == 0:
            raise EmptySample("No samples to summarize.")
        mean = float(np.mean(values))
        stderr = float(np.std(values, ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0
        return cls(
            n=len(values),
            mean=mean,
            stderr=stderr,
            ci_low=mean - 1.96 * stderr,
            ci_high=mean + 1.96 * stderr,
            max=float(np.max(values)),
            min=float(np.min(values)),
            rows=rows or [],
        )


class ExperimentResult(Model):
    config: ExperimentConfig
    summary: McSummary
    passed: bool
    details: t.Dict[str, t.Any] = {}
    report: t.Optional[ItoReport] = None


class MeshSweep(Model):
    results: t.List[ExperimentResult]
    decreasing: bool

    @property
    def passed(self) -> bool:
        """|mean| shrinks along the meshes and the finest run passes on its own."""
        return self.decreasing and self.results[-1].passed
