import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from topomap.errors import InvalidArgument
from topomap.schedules import (Schedules, cascade_learning_rate, cascade_probability,
                               schedule_arrays)

mpmath.mp.dps = 50


def ref_lc(i, c_o, c_s, i_max):
    x = (mpmath.mpf(c_o) - mpmath.mpf(i) / i_max) / mpmath.mpf(c_s)
    return (1 + mpmath.tanh(x)) / 2


def ref_p(i, c_m, c_d, n, i_max):
    base = 1 - 1 / mpmath.sqrt(mpmath.mpf(c_m) * n)
    return base * (1 - mpmath.mpf(i) / i_max) ** (mpmath.mpf(c_d) / n)


def test_lc_examples():
    s = Schedules(i_max=1000, n_units=900)
    assert cascade_learning_rate(0, s) == pytest.approx(0.880797, abs=5e-7)
    assert cascade_learning_rate(1000, s) == pytest.approx(0.119203, abs=5e-7)


def test_p_examples():
    s = Schedules(c_m=0.1, c_d=100, i_max=1000, n_units=900)
    assert cascade_probability(0, s) == pytest.approx(1 - 1 / math.sqrt(90), rel=1e-15)
    assert cascade_probability(0, s) == pytest.approx(0.894591, abs=5e-7)
    # the documented 0.828280 is a 6-digit rounding of 0.8282789...
    assert cascade_probability(500, s) == pytest.approx(0.828280, abs=2e-6)
    assert cascade_probability(500, s) == pytest.approx(
        float(ref_p(500, 0.1, 100, 900, 1000)), rel=1e-14)
    assert cascade_probability(1000, s) == 0.0


def test_scale_hook():
    # p_0 depends on N only through c_m * N
    a = Schedules(c_m=0.1, n_units=400, i_max=10)
    b = Schedules(c_m=0.04, n_units=1000, i_max=10)
    assert cascade_probability(0, a) == pytest.approx(cascade_probability(0, b), rel=1e-15)


@pytest.mark.parametrize("kwargs", [
    dict(c_m=0.001, n_units=900), dict(c_m=1.5, n_units=900), dict(c_s=0.0),
    dict(c_d=-1.0), dict(l_s=1.0), dict(i_max=0),
])
def test_validation(kwargs):
    base = dict(i_max=100, n_units=900)
    base.update(kwargs)
    with pytest.raises(InvalidArgument):
        Schedules(**base).validate()


# c_s >= 0.1 keeps |x| <= 10; beyond that the rate saturates to 1.0 in double precision
@given(st.floats(0.0, 1.0), st.floats(0.1, 2.0))
def test_lc_monotone_bounded(c_o, c_s):
    s = Schedules(c_o=c_o, c_s=c_s, i_max=50, n_units=100)
    vals = [cascade_learning_rate(i, s) for i in range(51)]
    assert all(0.0 < v < 1.0 for v in vals)
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_p_monotone_bounded():
    s = Schedules(c_m=0.1, c_d=1000, i_max=200, n_units=400)
    vals = [cascade_probability(i, s) for i in range(201)]
    assert all(0.0 <= v < 1.0 for v in vals)
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_arrays_match_scalars():
    s = Schedules(c_m=0.2, c_d=300, c_o=0.3, c_s=0.7, i_max=137, n_units=256)
    lc, p = schedule_arrays(s)
    assert len(lc) == 137
    for i in (0, 1, 68, 136):
        assert lc[i] == pytest.approx(cascade_learning_rate(i, s), rel=1e-14)
        assert p[i] == pytest.approx(cascade_probability(i, s), rel=1e-14)


def test_high_precision_grid():
    """Scalars and arrays agree with 50-digit evaluation to 1e-12 relative."""
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        n = int(rng.choice([100, 400, 900, 1156, 1600]))
        i_max = 600 * n
        c_o = float(rng.uniform(0, 1))
        c_s = float(rng.uniform(0.1, 1))
        c_m = float(rng.choice([0.01, 0.05, 0.1, 0.5, 1.0]))
        c_d = float(rng.choice([10, 100, 1000, 10000]))
        if c_m * n <= 1:
            continue
        i = int(rng.integers(0, i_max))
        s = Schedules(c_o=c_o, c_s=c_s, c_m=c_m, c_d=c_d, i_max=i_max, n_units=n)
        for got, ref in ((cascade_learning_rate(i, s), ref_lc(i, c_o, c_s, i_max)),
                         (cascade_probability(i, s), ref_p(i, c_m, c_d, n, i_max))):
            worst = max(worst, float(abs((mpmath.mpf(got) - ref) / ref)))
    assert worst < 1e-12, worst
