from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from dirichlet_lab.constants import (
    EmpiricalUpper, Exact, ball_volume, cn_threshold, covering_bound, dirichlet_D, gamma_half,
    half_gamma_identity, parse_range, survival_floor,
)
from dirichlet_lab.normspace import max_norm, p_norm

mpmath.mp.dps = 40


def _mp_cn(n):
    return (mpmath.mpf(n - 3) / (8 * mpmath.mpf(n - 2) ** 1.5)
            * mpmath.sqrt(mpmath.pi) * mpmath.gamma(n - 0.5) / mpmath.gamma(n))


@pytest.mark.parametrize("n", range(4, 16))
def test_cn_against_mpmath(n):
    iv = cn_threshold(n).interval
    assert iv.width < Fraction(1, 10 ** 15)
    assert abs(float(iv.mid) - float(_mp_cn(n))) < 1e-15


def test_cn_closed_form_n4():
    assert abs(float(cn_threshold(4)) - 5 * float(mpmath.pi) * 2 ** 0.5 / 512) < 1e-15


@pytest.mark.parametrize("k, want", [(0, 1), (2, mpmath.pi), (3, 4 * mpmath.pi / 3)])
def test_ball_volume(k, want):
    assert abs(float(ball_volume(k)) - float(want)) < 1e-15


@given(st.integers(1, 40))
def test_ball_volume_mpmath(k):
    want = mpmath.pi ** (mpmath.mpf(k) / 2) / mpmath.gamma(mpmath.mpf(k) / 2 + 1)
    assert abs(float(ball_volume(k)) / float(want) - 1) < 1e-14


@given(st.integers(1, 60))
def test_gamma_half(k):
    assert abs(float(gamma_half(k)) / float(mpmath.gamma(mpmath.mpf(k) / 2)) - 1) < 1e-13


@given(st.integers(2, 60))
def test_half_gamma_identity(n):
    assert half_gamma_identity(n)


def test_covering_bound_zero_and_monotone():
    z = covering_bound(4, 0, 0, 0, 30)
    assert z.lo == z.hi == 0
    a = covering_bound(5, 0, 0, Fraction(1, 1000), 10)
    b = covering_bound(5, Fraction(1, 10), 0, Fraction(1, 1000), 10)
    c = covering_bound(5, 0, 0, Fraction(1, 1000), 11)
    assert a.hi < b.lo and a.hi < c.lo


def test_survival_floor():
    assert survival_floor(3, Fraction(1, 100), 5) is None
    f = survival_floor(4, 0, 5)
    assert f.lo <= 1 <= f.hi


def test_dirichlet_D():
    d = dirichlet_D(max_norm(2), max_norm(1))
    assert isinstance(d, Exact) and d.value == 1
    assert isinstance(dirichlet_D(max_norm(1), max_norm(1)), Exact)
    emp = dirichlet_D(p_norm(2, 2), p_norm(1, 2), trials=3, max_height=10)
    assert isinstance(emp, EmpiricalUpper) and emp.label


def test_parse_range():
    assert parse_range("4..6") == [4, 5, 6]
    assert parse_range("7") == [7]
