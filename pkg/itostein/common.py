import math
import typing as t

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, PlainSerializer

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# Break points closer than this to a grid point are taken to lie on it.
GRID_ATOL = 1e-12

# A partition family whose last mesh falls below this counts as vanishing.
DEFAULT_MESH_TOLERANCE = 2.0**-20

# Quadrature values above this are reported as divergent.
OVERFLOW_THRESHOLD = 1e300


def _as_float_array(value: t.Any) -> np.ndarray:
    return np.asarray(value, dtype=float)


FloatArray = t.Annotated[
    np.ndarray,
    BeforeValidator(_as_float_array),
    PlainSerializer(lambda array: array.tolist(), return_type=t.List[t.Any], when_used="json"),
]


class Model(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)
