from fractions import Fraction as F

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from bcq.enclosure import (
    DEFAULT_WIDTH,
    FINEST_WIDTH,
    RationalEnclosure,
    enclose,
    exp_enclosure,
    exp_interval,
    log2_enclosure,
    log_enclosure,
    power_of_two,
)
from bcq.errors import InvalidInput

mpmath.mp.dps = 60


def mp(q: F):
    return mpmath.mpf(q.numerator) / q.denominator


def inside(enc: RationalEnclosure, value) -> bool:
    return mp(enc.lower) <= value <= mp(enc.upper)


rationals = st.fractions(min_value=-30, max_value=30, max_denominator=1000)
positives = st.fractions(min_value=F(1, 10**6), max_value=10**6, max_denominator=10**6)


@settings(max_examples=150, deadline=None)
@given(rationals)
def test_exp_contains_truth(x):
    enc = exp_enclosure(x)
    assert enc.width <= DEFAULT_WIDTH
    assert inside(enc, mpmath.exp(mp(x)))


@settings(max_examples=150, deadline=None)
@given(positives)
def test_log_contains_truth(x):
    enc = log_enclosure(x)
    assert enc.width <= DEFAULT_WIDTH
    assert inside(enc, mpmath.log(mp(x)))


@pytest.mark.parametrize("width", [F(1, 10**15), F(1, 10**22), FINEST_WIDTH])
def test_fine_widths(width):
    e = exp_enclosure(-1, width)
    assert e.width <= width and inside(e, mpmath.exp(-1))
    lg = log_enclosure(F(3, 4), width)
    assert lg.width <= width and inside(lg, mpmath.log(mpmath.mpf(3) / 4))


def test_exact_points():
    assert exp_enclosure(0).is_exact and exp_enclosure(0).lower == 1
    assert log_enclosure(1).is_exact and log_enclosure(1).lower == 0


def test_log2_of_three_quarters():
    enc = log2_enclosure(F(3, 4))
    truth = mpmath.log(mpmath.mpf(3) / 4, 2)
    assert inside(enc, truth)
    # 2 - log2(3) = -log2(3/4)
    assert inside(-enc, 2 - mpmath.log(3, 2))


def test_log_rejects_nonpositive():
    with pytest.raises(InvalidInput):
        log_enclosure(0)
    with pytest.raises(InvalidInput):
        log_enclosure(F(-1, 2))


def test_arithmetic_is_outward():
    a = RationalEnclosure(F(1), F(2))
    b = RationalEnclosure(F(-1), F(3))
    assert (a + b) == RationalEnclosure(F(0), F(5))
    assert (a - b) == RationalEnclosure(F(-2), F(3))
    assert (a * b) == RationalEnclosure(F(-2), F(6))
    assert (a / RationalEnclosure(F(2), F(4))) == RationalEnclosure(F(1, 4), F(1))
    with pytest.raises(ZeroDivisionError):
        b.reciprocal()


def test_interval_exp_covers_endpoints():
    enc = exp_interval(RationalEnclosure(F(-1), F(1)))
    assert inside(enc, mpmath.exp(-1)) and inside(enc, mpmath.exp(1))


def test_rounded_contains_original():
    e = enclose(F(1, 3))
    r = e.rounded(20)
    assert r.contains(F(1, 3)) and r.width <= F(2, 2**20)


def test_empty_enclosure_rejected():
    with pytest.raises(InvalidInput):
        RationalEnclosure(F(1, 3), F(2, 7))


def test_power_of_two():
    assert power_of_two(0) == 1
    assert power_of_two(3) == F(1, 8)
