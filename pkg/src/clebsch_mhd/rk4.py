"""Classical four-stage Runge-Kutta step shared by time evolution and gauge flows."""

from __future__ import annotations

from collections.abc import Callable
from typing import Protocol, TypeVar

import numpy as np


class _Displaceable(Protocol):
    data: np.ndarray

    def displaced(self, tangent: np.ndarray, scale: float = 1.0, time: float | None = None): ...


S = TypeVar("S", bound=_Displaceable)


def rk4_step(velocity: Callable[[S], np.ndarray], state: S, h: float, time: float | None = None) -> S:
    """Advance ``state`` by ``h`` along ``velocity`` (which returns raw data arrays).

    Every stage is a full state object, so the state's own validation (density
    positivity, finiteness) runs at each stage.
    """
    k1 = velocity(state)
    k2 = velocity(state.displaced(k1, 0.5 * h))
    k3 = velocity(state.displaced(k2, 0.5 * h))
    k4 = velocity(state.displaced(k3, h))
    return state.displaced((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0, h, time)
