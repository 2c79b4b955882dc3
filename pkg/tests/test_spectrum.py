from fractions import Fraction

import pytest

import oracles
from dirichlet_lab import ApproxProblem, QuadraticReal, best_approx_sequence
from dirichlet_lab.constructions import build_prime_power, build_sign_varied, build_two_scale
from dirichlet_lab.spectrum import (
    NoRelationFound, PrecisionExhausted, Relation, classify_records, extension_survives,
    integer_relation_probe, level_T, membership_probe, survival_sample, tT_grid_check,
    theta_estimate,
)

PHI = QuadraticReal(1, 1, 5, 2)


@pytest.fixture(scope="module")
def phi_records():
    return best_approx_sequence(ApproxProblem.of([[PHI]]), 1000)


def test_theta_phi(phi_records):
    est = theta_estimate(phi_records[:11], 1)
    assert abs(float(est.theta_sup.mid) - oracles.golden_theta()) < 2e-3


def test_theta_rational_is_terminal():
    recs = best_approx_sequence(ApproxProblem.of([[Fraction(2, 3)]]), 10)
    est = theta_estimate(recs, 1)
    assert est.terminal and est.theta_sup.hi == 0


def test_theta_two_scale():
    st = build_two_scale(n=2, c=Fraction(1, 2), levels=4)
    recs = best_approx_sequence(ApproxProblem.of([st.xi()]), 200)
    est = theta_estimate(recs, 2, min_height=st.seeds[1])
    assert abs(float(est.theta_sup.mid) - 0.5) < 0.025


def test_tT_grid(phi_records):
    rep = tT_grid_check(ApproxProblem.of([[PHI]]), phi_records[:8], 1)
    assert rep["ok"]


def test_membership_probe_phi(phi_records):
    fib = [1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987]
    heights = sorted({f - Fraction(1, 2) for f in fib[1:]} | set(fib))
    rep = membership_probe(ApproxProblem.of([[PHI]]), Fraction(7, 10), heights, phi_records)
    assert rep["sing_violation_heights"]
    assert rep["kind"] == "finite-height evidence"


def test_membership_probe_two_scale_no_violation():
    st = build_two_scale(n=2, c=Fraction(1, 2), levels=4)
    prob = ApproxProblem.of([st.xi()])
    recs = best_approx_sequence(prob, 200)
    heights = [int(r.height.lo) for r in recs if r.height.lo >= 4]
    rep = membership_probe(prob, Fraction(3, 5), heights, recs)
    assert rep["sing_violation_heights"] == []


def test_membership_probe_rational_zero():
    prob = ApproxProblem.of([[Fraction(3, 7)]])
    rep = membership_probe(prob, Fraction(1, 2), [1, 2, 7, 10, 20])
    assert rep["psi_zero_from"] == "7"


def test_classification_generic_vector_is_other():
    st = build_prime_power(2, Fraction(1, 4), levels=4)
    recs = best_approx_sequence(ApproxProblem.of([[Fraction(13, 47), Fraction(29, 53)]]), 100)
    rep = classify_records(st, recs)
    assert sum(lab == "Other" for *_, lab in rep.verdicts) >= len(recs) - 1


def test_survival_determinism():
    st = build_prime_power(4, Fraction(1, 25), levels=3)
    xi = st.xi()
    recs = best_approx_sequence(ApproxProblem.of([xi]), 60)
    a = survival_sample(xi, 4, recs, 3, 6, prng_seed=5)
    b = survival_sample(xi, 4, recs, 3, 6, prng_seed=5)
    assert a.to_json() == b.to_json()
    assert 0 <= a.fraction <= 1
    assert a.T_v == level_T(recs, 3)


def test_degenerate_extension_fails():
    st = build_prime_power(4, Fraction(1, 25), levels=3)
    xi = st.xi()
    recs = best_approx_sequence(ApproxProblem.of([xi]), 60)
    for v in (1, 2, 3):
        ok, wit = extension_survives(xi, (xi[0] + xi[1], 0), recs[v - 1].quality, level_T(recs, v))
        assert not ok and wit is not None


def test_integer_relation_probe():
    rel = integer_relation_probe([Fraction(1, 2), Fraction(1, 3)], 6)
    assert isinstance(rel, Relation) and rel.coeffs == (2, 0, -1)
    # least max-norm wins over the equally valid (2, -3, 0)
    assert 2 * Fraction(1, 2) - 3 * Fraction(1, 3) + 0 == 0
    assert isinstance(integer_relation_probe([PHI], 10), NoRelationFound)


def test_integer_relation_probe_sign_varied():
    base = build_prime_power(4, Fraction(1, 25), levels=3)
    # seed 0 with m = 2 negates row 1's A-signs in row 2: x_11 + x_21 vanishes on every
    # computed term, which the probe must report instead of guessing
    sv = build_sign_varied(base, 2, sign_seed=0)
    vals = [x for row in sv.rows() for x in row]
    with pytest.raises(PrecisionExhausted):
        integer_relation_probe(vals, 10)
