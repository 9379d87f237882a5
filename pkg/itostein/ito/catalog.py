"""Named test functions: WeakDiffFunction entries for the Itô-formula checks and space-time functions for
the covariation and local-time integral checks."""

import typing as t

import numpy as np

from itostein.ito.ops import localize
from itostein.ito.schemas import WeakDiffFunction
from itostein.ltintegral.schemas import Smoothness, SpaceTimeFunction


def _zeros(x, s):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(s)).shape)


def _ones(x, s):
    return np.ones(np.broadcast(np.asarray(x), np.asarray(s)).shape)


def zero(half_width: float = 3.0) -> WeakDiffFunction:
    return WeakDiffFunction(value=_zeros, dx=_zeros, dt=_zeros, half_width=half_width, time_dependent=False, name="zero")


def square(half_width: float = 8.0, width: float = 1.0) -> WeakDiffFunction:
    """x^2, cut off smoothly outside |x| <= half_width - width."""
    plain = WeakDiffFunction(
        value=lambda x, s: np.asarray(x, dtype=float) ** 2 + _zeros(x, s),
        dx=lambda x, s: 2.0 * np.asarray(x, dtype=float) + _zeros(x, s),
        dt=_zeros,
        half_width=half_width,
        time_dependent=False,
        name="square",
    )
    return localize(plain, half_width, width)


def _capped_abs(x):
    return np.minimum(np.abs(x), 1.0)


def _capped_abs_dx(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < 1.0, np.sign(x), 0.0)


def capped_abs(half_width: float = 3.0) -> WeakDiffFunction:
    """min(|x|, 1)."""
    return WeakDiffFunction(
        value=lambda x, s: _capped_abs(x) + _zeros(x, s),
        dx=lambda x, s: _capped_abs_dx(x) + _zeros(x, s),
        dt=_zeros,
        half_width=half_width,
        x_kinks=[-1.0, 0.0, 1.0],
        time_dependent=False,
        name="capped-abs",
    )


def time_capped_abs(half_width: float = 3.0) -> WeakDiffFunction:
    """(1 + t) * min(|x|, 1)."""
    return WeakDiffFunction(
        value=lambda x, s: (1.0 + np.asarray(s, dtype=float)) * _capped_abs(x),
        dx=lambda x, s: (1.0 + np.asarray(s, dtype=float)) * _capped_abs_dx(x),
        dt=lambda x, s: _capped_abs(x) + _zeros(x, s),
        half_width=half_width,
        x_kinks=[-1.0, 0.0, 1.0],
        time_dependent=True,
        name="time-capped-abs",
    )


def capped_positive(half_width: float = 3.0) -> WeakDiffFunction:
    """min(max(x, 0), 1)."""
    return WeakDiffFunction(
        value=lambda x, s: np.clip(np.asarray(x, dtype=float), 0.0, 1.0) + _zeros(x, s),
        dx=lambda x, s: np.where((np.asarray(x) > 0.0) & (np.asarray(x) < 1.0), 1.0, 0.0) + _zeros(x, s),
        dt=_zeros,
        half_width=half_width,
        x_kinks=[0.0, 1.0],
        time_dependent=False,
        name="capped-positive",
    )


FUNCTIONS: t.Dict[str, t.Callable[..., WeakDiffFunction]] = {
    "zero": zero,
    "square": square,
    "capped-abs": capped_abs,
    "time-capped-abs": time_capped_abs,
    "capped-positive": capped_positive,
}


def identity(half_width: float = 3.0) -> SpaceTimeFunction:
    return SpaceTimeFunction(
        evaluator=lambda x, s: np.asarray(x, dtype=float) + _zeros(x, s),
        half_width=half_width,
        smoothness=Smoothness.piecewise_continuous,
        name="identity",
    )


def sign(half_width: float = 3.0) -> SpaceTimeFunction:
    return SpaceTimeFunction(
        evaluator=lambda x, s: np.sign(np.asarray(x, dtype=float)) + _zeros(x, s),
        half_width=half_width,
        smoothness=Smoothness.piecewise_continuous,
        x_kinks=[0.0],
        name="sign",
    )


def constant(value: float = 1.0, half_width: float = 3.0) -> SpaceTimeFunction:
    return SpaceTimeFunction(
        evaluator=lambda x, s: value * _ones(x, s),
        half_width=half_width,
        smoothness=Smoothness.piecewise_continuous,
        name=f"constant({value})",
    )


SPACE_TIME_FUNCTIONS: t.Dict[str, t.Callable[..., SpaceTimeFunction]] = {
    "identity": identity,
    "sign": sign,
    "constant": constant,
}


def get(name: str, **kwargs: t.Any) -> WeakDiffFunction:
    if name not in FUNCTIONS:
        raise ValueError(f"Unknown function {name}; expected one of {sorted(FUNCTIONS)}.")
    return FUNCTIONS[name](**kwargs)


def get_space_time(name: str, **kwargs: t.Any) -> SpaceTimeFunction:
    if name not in SPACE_TIME_FUNCTIONS:
        raise ValueError(f"Unknown space-time function {name}; expected one of {sorted(SPACE_TIME_FUNCTIONS)}.")
    return SPACE_TIME_FUNCTIONS[name](**kwargs)
