class ItosteinError(Exception):
    """Base class for every error raised by itostein."""


class InvalidInput(ItosteinError, ValueError):
    pass


class NumericalFailure(ItosteinError, ArithmeticError):
    pass


# Paths


class NonpositiveRho(InvalidInput):
    pass


class BoundViolation(InvalidInput):
    pass


class DegenerateTime(InvalidInput):
    pass


class EmptySample(InvalidInput):
    pass


class OffGridTime(InvalidInput):
    pass


# Partitions


class MeshNotVanishing(InvalidInput):
    pass


class RatioUnbounded(InvalidInput):
    pass


class PartitionInvalid(InvalidInput):
    pass


class PartitionFinerThanPath(InvalidInput):
    pass


# Local time and its integral


class BandwidthTooSmall(InvalidInput):
    pass


class EmptyTimes(InvalidInput):
    pass


class GridMismatch(InvalidInput):
    pass


class NotInH(InvalidInput):
    pass


class DivergentNorm(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


# Itô engine


class KernelNotNormalized(NumericalFailure):
    pass


class CertificateFailure(NumericalFailure):
    pass


class InconsistentMollification(NumericalFailure):
    pass


# Harness


class ConfigInvalid(InvalidInput):
    pass


class ExperimentError(ItosteinError):
    def __init__(self, kind: str, path_index: int, cause: Exception):
        super().__init__(kind, path_index, cause)
        self.kind = kind
        self.path_index = path_index
        self.cause = cause

    def __str__(self):
        return f"Experiment {self.kind} failed on path {self.path_index}: {self.cause}"
