from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dirichlet_lab import ApproxProblem
from dirichlet_lab.constructions import build_prime_power, repeated_row
from dirichlet_lab.transference import (
    DUAL, PRIMAL, TransferBox, box_monotone, box_symmetric, calibrated_C, dual_params,
    transpose_delta, transpose_folklore_check, verify_transference,
)


def test_dual_params_hand_values():
    dp = dual_params(2, 1, Fraction(1, 10), 10)
    a, b = dp.intervals()
    assert abs(float(a.mid) - 0.0316227766) < 1e-6
    assert abs(float(b.mid) - 3.16227766) < 1e-6
    assert dp.exponents == {"A_star": ["1", "-1/2"], "B_star": ["0", "1/2"]}


def test_dual_params_collapse_one_by_one():
    dp = dual_params(1, 1, Fraction(3, 7), 5, C=2)
    assert dp.A_star.power == Fraction(6, 7) and dp.B_star.power == 10


@given(st.fractions(min_value=Fraction(1, 100), max_value=1), st.integers(1, 50),
       st.fractions(min_value=Fraction(1, 10), max_value=10))
def test_dual_params_scale_with_C(A, B, C):
    base, scaled = dual_params(2, 1, A, B), dual_params(2, 1, A, B, C)
    assert scaled.A_star.power == base.A_star.power * C ** 2
    assert scaled.B_star.power == base.B_star.power * C ** 2


def test_verify_examples():
    assert verify_transference([[Fraction(1, 2)]], 1, 1, 1).status == "ImplicationHolds"
    assert verify_transference([[Fraction(13, 31), Fraction(5, 17)]], Fraction(1, 10 ** 6), 2, 1).status \
        == "PrimalEmpty"


def test_shipped_calibration():
    assert calibrated_C(2, 1) == 1 and calibrated_C(1, 2) == 1


entries = st.fractions(min_value=-1, max_value=1, max_denominator=12)


@settings(max_examples=20)
@given(st.lists(entries, min_size=2, max_size=2), st.integers(0, 3), st.integers(1, 3),
       st.sampled_from([PRIMAL, DUAL]))
def test_box_symmetry_and_monotonicity(row, k, B, orient):
    A = Fraction(1, 2 ** k)
    small = TransferBox([row], A, B, orient)
    large = TransferBox([row], A * 2, B + 1, orient)
    assert box_symmetric(small)
    assert box_monotone(small, large)
    for p in small.points():
        assert small.contains(p)


def test_transpose_delta():
    d = transpose_delta(1, 1, Fraction(1, 4))
    assert d.contains(Fraction(1, 4))
    d = transpose_delta(3, 1, Fraction(1, 20))
    assert abs(float(d.mid) - 0.716871164437) < 1e-9


def test_transpose_folklore_check():
    st_ = build_prime_power(3, Fraction(1, 30), levels=3)
    col = repeated_row(st_.xi(), 1)
    prob = ApproxProblem.of(col.rows)
    rep = transpose_folklore_check(prob, Fraction(1, 30), Fraction(1, 20), [2, 4, 8, 16, 32])
    assert rep.total_heights == 5
    assert 0 <= rep.di_fraction <= 1
    assert rep.to_json()["kind"] == "finite-height evidence"


def test_invalid_box():
    with pytest.raises(ValueError):
        TransferBox([[Fraction(1, 2)]], 0, 1)
