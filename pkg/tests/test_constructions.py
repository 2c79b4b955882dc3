import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dirichlet_lab.constructions import (
    ConstructionWarning, InvariantViolation, NoPairWithinBound, PrimePowerState, TwoScaleState,
    build_prime_power, build_sign_varied, build_two_scale, compose, default_tau, kronecker_step,
    sample_extension, smith_divisors, state_from_json,
)
from dirichlet_lab.exactnum import log_interval


def test_two_scale_recursion():
    st_ = build_two_scale(n=2, c=Fraction(1, 2), levels=2)
    a = st_.levels
    assert (a[0], a[1], a[2], a[3]) == (2, 4, 64, 8192)
    assert st_.check() == []


def test_two_scale_degenerate_at_c_one():
    with pytest.warns(ConstructionWarning):
        st_ = build_two_scale(n=2, c=1, levels=2)
    assert st_.degenerate
    assert st_.levels[3] == st_.levels[2] ** 2


def test_two_scale_rejects_bad_c():
    with pytest.raises(ValueError):
        build_two_scale(c=Fraction(3, 2))


def test_two_scale_json_roundtrip():
    st_ = build_two_scale(n=2, c=Fraction(1, 5), levels=3)
    back = state_from_json(st_.to_json())
    assert isinstance(back, TwoScaleState) and back.digest == st_.digest


def test_kronecker_examples():
    l2, l3 = log_interval(2, 96), log_interval(3, 96)
    p = kronecker_step(l2, l3, log_interval(1000, 96), Fraction(3, 100), 20)
    assert (p.k1, p.k2) == (10, 0)
    assert abs(float(p.error.mid) - 0.0237) < 1e-3
    p = kronecker_step(l2, l3, l2 * 7, Fraction(1, 10 ** 6), 20)
    assert (p.k1, p.k2) == (7, 0)
    with pytest.raises(NoPairWithinBound):
        kronecker_step(l2, l3, log_interval(1000, 96), Fraction(2, 100), 12)


def test_default_tau():
    assert default_tau(4) == Fraction(201, 50)
    assert default_tau(2) == Fraction(37, 18)


@pytest.mark.parametrize("tau, levels", [(None, 3), (Fraction(401, 100), 2)])
def test_prime_power_invariants(tau, levels):
    st_ = build_prime_power(4, Fraction(1, 25), tau=tau, levels=levels)
    assert st_.check() == []
    if tau is not None:
        assert st_.mu == 100 and st_.mu > st_.tau ** 2
    assert st_.A[0] == 6 and st_.B[0] == 35
    for j in range(st_.depth):
        assert st_.F[j] % 6 == 1 and st_.G[j] % 35 == 1
        assert math.gcd(st_.A[j], st_.F[j]) == 1
    back = state_from_json(st_.to_json())
    assert isinstance(back, PrimePowerState) and back.digest == st_.digest


def test_smith_divisors():
    assert smith_divisors(((6, 0, -1), (0, 35, -1))) == (1, 1)
    assert smith_divisors(((2, 0, 4), (0, 2, 6))) == (2, 2)


def test_sign_varied():
    base = build_prime_power(4, Fraction(1, 25), levels=3)
    same = build_sign_varied(base, 2, signs=[[1, 1, 1]] * 2, signs_star=[[1, 1, 1]] * 2)
    w = Fraction(1, 10 ** 40)
    for row in same.rows():
        for x, y in zip(row, base.xi()):
            assert x.eval(w).lo <= y.eval(w).hi and y.eval(w).lo <= x.eval(w).hi
    flip = build_sign_varied(base, 2, signs=[[1, 1, 1], [1, -1, 1]], signs_star=[[1, 1, 1]] * 2)
    (r1, r2) = flip.rows()
    a, b = r1[0].eval(w), r2[0].eval(w)
    assert a.hi < b.lo or b.hi < a.lo
    assert flip.check() == []


def test_compose_examples():
    bd = compose("BlockDiagonal", [Fraction(1, 2)], [Fraction(1, 3)])
    vals = [[x.rational_value for x in r] for r in bd.rows]
    assert vals == [[Fraction(1, 2), 0], [0, Fraction(1, 3)]]
    rr = compose("RepeatedRowV", [Fraction(1, 5), Fraction(2, 7)], m=3)
    assert rr.shape == (3, 2) and rr.rows[0] == rr.rows[1] == rr.rows[2]
    ext = compose("ExtendColumns", [[1, 2], [3, 4]], [[Fraction(1, 3), 0], [5, 6]])
    assert ext.shape == (2, 4)
    tr = compose("Transpose", ext)
    assert tr.shape == (4, 2)
    with pytest.raises(ValueError):
        compose("ExtendColumns", [[1, 2]], [[1], [2]])
    with pytest.raises(ValueError):
        compose("Nope", [1])


def test_compose_invariant_violation():
    from dirichlet_lab.constructions import MatrixBuild
    bad = MatrixBuild("RepeatedRowV", ((1,), (2,)))
    assert bad.check()
    assert issubclass(InvariantViolation, ArithmeticError)


def test_sample_extension_determinism():
    a = sample_extension(2, 0)
    assert a == sample_extension(2, 0)
    assert a != sample_extension(2, 1)
    assert sum(x * x for x in a) <= 1
    assert all((x * 2 ** 20).denominator == 1 for x in a)


@given(st.integers(0, 2 ** 32), st.integers(1, 5))
def test_sample_extension_in_ball(seed, d):
    x = sample_extension(d, seed, grid_bits=12)
    assert len(x) == d and sum(v * v for v in x) <= 1
