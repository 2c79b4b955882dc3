from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from dirichlet_lab.exactnum import (
    InsufficientLevels, Interval, LinearCombination, Literal, Order, QuadraticReal, SeriesReal,
    cmp_certified, log_interval, parse_exact, pi_interval, root_interval,
)

mpmath.mp.dps = 60
fracs = st.fractions(min_value=-1000, max_value=1000, max_denominator=10 ** 6)


def _contains_mp(iv, x):
    return mpmath.mpf(iv.lo.numerator) / iv.lo.denominator <= x <= mpmath.mpf(iv.hi.numerator) / iv.hi.denominator


def test_literal_is_exact():
    iv = Literal(Fraction(3, 7)).eval(Fraction(1, 1000))
    assert iv.lo == iv.hi == Fraction(3, 7)


def test_series_tail_bound():
    xi1 = SeriesReal([Fraction(1, 6), Fraction(1, 6 ** 5), Fraction(1, 6 ** 21)])
    w = Fraction(1, 6 ** 4)
    iv = xi1.eval(w)
    assert iv.contains(Fraction(1, 6) + Fraction(1, 6 ** 5))
    assert iv.width <= w


def test_series_out_of_terms():
    with pytest.raises(InsufficientLevels):
        SeriesReal([Fraction(1, 2), Fraction(1, 8)]).eval(Fraction(1, 10 ** 6))


def test_series_rejects_slow_decay():
    with pytest.raises(ValueError):
        SeriesReal([Fraction(1, 2), Fraction(1, 3)])


@given(st.lists(st.integers(1, 30), min_size=2, max_size=8))
def test_series_enclosures_nested(steps):
    exps, e = [], 0
    for s in steps:
        e += s
        exps.append(e)
    x = SeriesReal([Fraction(1, 2 ** k) for k in exps])
    encl = [x.enclosure(k) for k in range(len(exps))]
    for a, b in zip(encl, encl[1:]):
        assert a.lo <= b.lo and b.hi <= a.hi


@pytest.mark.parametrize("a, b, want", [
    (Interval(1, 2), Interval(3, 4), Order.LESS),
    (Interval(3, 4), Interval(1, 2), Order.GREATER),
    (Interval(1, 3), Interval(2, 4), Order.OVERLAP),
    (Interval.point(Fraction(5, 2)), Interval.point(Fraction(5, 2)), Order.OVERLAP),
])
def test_cmp_certified(a, b, want):
    assert cmp_certified(a, b) is want


@given(fracs, fracs, fracs, fracs)
def test_interval_arithmetic_contains_point_results(a, b, c, d):
    x, y = Interval(min(a, b), max(a, b)), Interval(min(c, d), max(c, d))
    for p in (x.lo, x.hi, x.mid):
        for q in (y.lo, y.hi, y.mid):
            assert (x + y).contains(p + q)
            assert (x - y).contains(p - q)
            assert (x * y).contains(p * q)


@given(fracs, fracs, st.integers(8, 200))
def test_outward_rounding(a, b, bits):
    iv = Interval(min(a, b), max(a, b))
    r = iv.round_out(bits)
    assert r.lo <= iv.lo and iv.hi <= r.hi
    c = iv.compact(bits, limit=8)
    assert c.lo <= iv.lo and iv.hi <= c.hi


def test_pi_and_log_against_mpmath():
    assert _contains_mp(pi_interval(200), mpmath.pi)
    for x in (2, 3, 5, 7, Fraction(10, 3)):
        assert _contains_mp(log_interval(x, 150), mpmath.log(mpmath.mpf(Fraction(x).numerator) / Fraction(x).denominator))


@given(st.integers(1, 10 ** 9), st.integers(2, 9))
def test_root_interval(q, k):
    iv = root_interval(q, k, 64)
    assert iv.lo ** k <= q <= iv.hi ** k
    assert iv.width < Fraction(1, 2 ** 50) * (1 + iv.hi)


def test_quadratic_real():
    phi = QuadraticReal(1, 1, 5, 2)
    iv = phi.eval(Fraction(1, 10 ** 30))
    assert _contains_mp(iv, (1 + mpmath.sqrt(5)) / 2)
    assert iv.width <= Fraction(1, 10 ** 30)
    with pytest.raises(ValueError):
        QuadraticReal(0, 1, 4, 1)


def test_linear_combination_and_json_roundtrip():
    s2 = QuadraticReal(0, 1, 2, 1)
    x = LinearCombination.of([(2, s2), (-1, Literal(1))])
    back = parse_exact(x.to_json())
    w = Fraction(1, 10 ** 20)
    for y in (x, back):
        assert _contains_mp(y.eval(w), 2 * mpmath.sqrt(2) - 1)


def test_literal_parse():
    assert parse_exact("3/7").rational_value == Fraction(3, 7)
