"""Training-index-dependent learning rate and cascading probability."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class Schedules:
    """Hyper-parameters of the sample and cascade adaptation.

    l_s: constant sample learning rate.
    c_o, c_s: offset and slope of the cascading learning rate.
    c_m, c_d: early cascade magnitude and cascade decay.
    """

    l_s: float = 0.05
    c_o: float = 0.5
    c_s: float = 0.5
    c_m: float = 0.1
    c_d: float = 100.0
    i_max: int = 1
    n_units: int = 1

    def validate(self) -> "Schedules":
        if not 0.0 < self.l_s < 1.0:
            raise InvalidArgument(f"l_s must lie in (0, 1), got {self.l_s}")
        if self.c_s <= 0:
            raise InvalidArgument(f"c_s must be positive, got {self.c_s}")
        if self.c_d <= 0:
            raise InvalidArgument(f"c_d must be positive, got {self.c_d}")
        if self.c_m > 1:
            raise InvalidArgument(f"c_m must be <= 1, got {self.c_m}")
        if self.c_m * self.n_units <= 1:
            raise InvalidArgument(
                f"c_m * N must exceed 1 (c_m={self.c_m}, N={self.n_units})"
            )
        if self.i_max < 1:
            raise InvalidArgument(f"i_max must be positive, got {self.i_max}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


# (1 + tanh x) / 2 is evaluated as the logistic 1 / (1 + exp(-2x)), which is the
# same function but keeps full relative precision when the rate is tiny.

def cascade_learning_rate(i, sched: Schedules) -> float:
    x = (sched.c_o - i / sched.i_max) / sched.c_s
    return 1.0 / (1.0 + math.exp(-2.0 * x))


def cascade_probability(i, sched: Schedules) -> float:
    if sched.c_m * sched.n_units <= 1:
        raise InvalidArgument("c_m * N must exceed 1")
    base = 1.0 - 1.0 / math.sqrt(sched.c_m * sched.n_units)
    remaining = max(sched.i_max - i, 0) / sched.i_max  # exact for integer i
    return base * remaining ** (sched.c_d / sched.n_units)


def schedule_arrays(sched: Schedules, n: int | None = None):
    """Vectorized ``(l_c, p)`` for training indices ``0 .. n-1`` (default i_max)."""
    if sched.c_m * sched.n_units <= 1:
        raise InvalidArgument("c_m * N must exceed 1")
    n = sched.i_max if n is None else n
    i = np.arange(n, dtype=float)
    l_c = 1.0 / (1.0 + np.exp(-2.0 * (sched.c_o - i / sched.i_max) / sched.c_s))
    base = 1.0 - 1.0 / math.sqrt(sched.c_m * sched.n_units)
    remaining = np.clip(sched.i_max - i, 0.0, None) / sched.i_max
    p = base * np.power(remaining, sched.c_d / sched.n_units)
    return l_c, p
