from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dirichlet_lab.normspace import (
    custom_norm, eval_norm, is_expanding, max_norm, norm_constants, p_norm, project_norm,
    weighted_max_norm,
)

small = st.fractions(min_value=-50, max_value=50, max_denominator=100)


def test_eval_norm_examples():
    assert eval_norm(max_norm(3), [3, -4, 1]) == _point(4)
    iv = eval_norm(p_norm(2, 2), [3, 4], Fraction(1, 10 ** 9))
    assert iv.contains(5) and iv.width <= Fraction(1, 10 ** 9)
    assert eval_norm(weighted_max_norm([2, 1]), [1, 3]) == _point(3)


def _point(x):
    from dirichlet_lab.exactnum import Interval
    return Interval.point(Fraction(x))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        eval_norm(max_norm(2), [1, 2, 3])


def test_project_norm_examples():
    assert project_norm(max_norm(5), [0, 1]).kind == "max"
    pr = project_norm(p_norm(3, 2), [0, 1])
    assert pr.kind == "p" and pr.p == 2 and pr.dimension == 2
    cn = custom_norm(2, (Fraction(1, 2), 2), forms=[[1, 0], [1, 1]])
    one = project_norm(cn, [0])
    assert eval_norm(one, [Fraction(7, 3)]) == _point(Fraction(7, 3))
    assert (one.equiv_lo, one.equiv_hi) == (1, 1)


def test_is_expanding():
    assert is_expanding(max_norm(3)).certified_on_samples
    assert is_expanding(p_norm(3, Fraction(3, 2))).certified_on_samples
    bad = custom_norm(2, (Fraction(1, 300), 3), forms=[[1, -1], [0, Fraction(1, 100)]], combine="sum")
    res = is_expanding(bad)
    assert not res.certified_on_samples
    x = res.counterexample
    assert eval_norm(bad, x).hi < max(eval_norm(bad, [x[0], 0]).lo, eval_norm(bad, [0, x[1]]).lo)


def test_custom_norm_rejects_bad_constants():
    with pytest.raises(ValueError):
        custom_norm(2, (1, 1), forms=[[1, -1], [0, Fraction(1, 100)]], combine="sum")
    with pytest.raises(ValueError):
        custom_norm(2, (1, 2), forms=[[1, 1], [2, 2]])


@pytest.mark.parametrize("norm", [max_norm(3), p_norm(3, 2), p_norm(3, Fraction(3, 2)),
                                  weighted_max_norm([1, 2, Fraction(1, 3)])])
@given(u=st.lists(small, min_size=3, max_size=3), v=st.lists(small, min_size=3, max_size=3), lam=small)
def test_norm_axioms(norm, u, v, lam):
    w = Fraction(1, 10 ** 9)
    nu, nv = eval_norm(norm, u, w), eval_norm(norm, v, w)
    nsum = eval_norm(norm, [a + b for a, b in zip(u, v)], w)
    assert nsum.lo <= nu.hi + nv.hi
    nl = eval_norm(norm, [lam * a for a in u], w)
    assert nl.lo <= abs(lam) * nu.hi and abs(lam) * nu.lo <= nl.hi
    top = max(abs(a) for a in u)
    assert norm.equiv_lo * top <= nu.hi and nu.lo <= norm.equiv_hi * top


def test_norm_constants():
    k = norm_constants(p_norm(2, 2))
    assert k.d1.contains(1) and k.d2.contains(1)
    assert k.gamma_allones.lo ** 2 <= 2 <= k.gamma_allones.hi ** 2
