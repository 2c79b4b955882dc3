"""Builders for the explicit vectors and matrices studied by the lab.

* two-scale vectors: a doubly exponential integer recursion whose reciprocal
  sums give a vector in R^2 with a prescribed uniform exponent constant;
* prime-power vectors: reciprocals of 2^a 3^g and 5^b 7^d chosen by an
  exponent search so that consecutive terms follow prescribed power laws;
* sign-varied variants of the latter, one row per sign stream;
* matrix compositions (repeated rows, block diagonals, appended columns,
  transposes) and random extensions drawn from the unit ball.

All integers are exact; the real coordinates are ``SeriesReal`` objects
whose tails are certified by the growth of the recursion.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .exactnum import (
    ExactReal,
    Interval,
    Number,
    SeriesReal,
    as_exact,
    as_rational,
    log_interval,
    log_interval_of,
    rational_str,
)
from .normspace import NormDescriptor, max_norm

DEFAULT_BIT_CAP = 10 ** 6
EPS0 = Fraction(1, 10)


class ConstructionWarning(UserWarning):
    """A finite-depth construction has not yet entered its asymptotic regime."""


class LevelBudgetExceeded(RuntimeError):
    pass


class NoPairWithinBound(ValueError):
    pass


class InvariantViolation(ArithmeticError):
    pass


def digest_of(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def eps_schedule(j: int, eps0: Fraction = EPS0) -> Fraction:
    """Tolerance for level j >= 1: eps0 / 2**j."""
    return Fraction(eps0) / (1 << j)


# ---------------------------------------------------------------------------
# two-scale vectors

@dataclass(frozen=True)
class TwoScaleState:
    n: int
    c: Fraction
    seeds: tuple
    schedule: tuple          # M_1, M_2, ... actually used
    levels: tuple            # a_1, a_2, ...
    degenerate: bool = False
    notes: tuple = ()

    kind = "two-scale"

    @property
    def digest(self) -> str:
        return digest_of(self.defining_json())

    def defining_json(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "c": rational_str(self.c),
            "seeds": list(self.seeds),
            "schedule": list(self.schedule),
            "levels": [str(a) for a in self.levels],
        }

    def to_json(self) -> dict:
        d = self.defining_json()
        d.update(digest=self.digest, degenerate=self.degenerate, notes=list(self.notes))
        return d

    @classmethod
    def from_json(cls, d: dict) -> "TwoScaleState":
        st = cls(int(d["n"]), as_rational(d["c"]), tuple(d["seeds"]), tuple(d["schedule"]),
                 tuple(int(a) for a in d["levels"]), bool(d.get("degenerate", False)),
                 tuple(d.get("notes", ())))
        bad = st.check()
        if bad:
            raise InvariantViolation("; ".join(bad))
        return st

    def xi(self) -> tuple:
        """(xi_1, xi_2) with xi_j = sum over k of 1/a_{2k+j}."""
        out = []
        for j in (1, 2):
            terms = [Fraction(1, a) for a in self.levels[j - 1::2]]
            out.append(SeriesReal(terms, {"state": self.digest, "coord": j - 1}))
        return tuple(out)

    def check(self) -> list:
        """Exact recursion checks; returns the list of violations (empty when sound)."""
        bad = []
        a = self.levels
        if a[1] % a[0]:
            bad.append("a_1 does not divide a_2")
        for k in range(1, len(a) // 2 + 1):
            i = 2 * k  # a_{2k} is a[i - 1]
            if i < len(a):
                if a[i] != a[i - 1] ** self.schedule[k - 1]:
                    bad.append(f"a_{i + 1} != a_{i}^M_{k}")
            if i + 1 < len(a):
                x = a[i]
                want = x * _ceil_frac(Fraction(x ** (self.n - 1)) / self.c)
                if a[i + 1] != want:
                    bad.append(f"a_{i + 2} does not follow the recursion")
                elif a[i + 1] <= x ** self.n and not self.degenerate:
                    bad.append(f"a_{i + 2} <= a_{i + 1}^n")
        return bad


def _ceil_frac(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


def build_two_scale(n: int = 2, c: Number = Fraction(1, 2), seeds: Sequence[int] = (2, 4),
                    schedule: Optional[Sequence[int]] = None, levels: int = 4,
                    bit_cap: int = DEFAULT_BIT_CAP) -> TwoScaleState:
    """Integers a_1..a_{2 levels} of the two-scale recursion; each level adds one
    term to each coordinate.

    ``schedule`` gives M_1, M_2, ...; the default is M_k = k + 2.
    """
    c = as_rational(c)
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0 < c <= 1:
        raise ValueError("c must lie in (0, 1]")
    a1, a2 = (int(s) for s in seeds)
    if a1 < 2 or a2 < 2 or a2 % a1:
        raise ValueError("seeds must satisfy 2 <= a_1, a_1 | a_2")
    if levels < 1:
        raise ValueError("need at least the seed level")
    npairs = levels - 1
    levels = 2 * levels
    if schedule is None:
        schedule = [k + 2 for k in range(1, npairs + 1)]
    schedule = [int(m) for m in schedule]
    if len(schedule) < npairs:
        raise ValueError(f"schedule needs {npairs} exponents for {npairs + 1} levels")
    if any(b <= a for a, b in zip(schedule, schedule[1:])) or (schedule and schedule[0] < 1):
        raise ValueError("exponents M_k must be positive and strictly increasing")

    a = [a1, a2]
    degenerate = False
    notes = []
    k = 1
    while len(a) < levels:
        nxt = a[-1] ** schedule[k - 1]
        if nxt.bit_length() > bit_cap:
            raise LevelBudgetExceeded(f"a_{len(a) + 1} would exceed {bit_cap} bits")
        a.append(nxt)
        if len(a) == levels:
            break
        x = a[-1]
        f = _ceil_frac(Fraction(x ** (n - 1)) / c)
        nxt = x * f
        if nxt.bit_length() > bit_cap:
            raise LevelBudgetExceeded(f"a_{len(a) + 1} would exceed {bit_cap} bits")
        if nxt <= x ** n:
            degenerate = True
            notes.append(f"a_{len(a) + 1} = a_{len(a)}^n (no strict growth)")
        a.append(nxt)
        k += 1
    # the tail of xi_2 after a_2 is dominated by 1/a_4 only once a_4 > 2 a_2 etc.
    for i in range(2, len(a)):
        if a[i] < 2 * a[i - 2]:
            notes.append(f"a_{i + 1} < 2 a_{i - 1}: series decay not yet certified")
    if len(a) < 4:
        notes.append("a single level: no recursion step checked")
    st = TwoScaleState(n, c, (a1, a2), tuple(schedule[:npairs]), tuple(a), degenerate, tuple(notes))
    bad = st.check()
    if bad:
        raise InvariantViolation("; ".join(bad))
    for msg in notes:
        warnings.warn(msg, ConstructionWarning, stacklevel=2)
    return st


# ---------------------------------------------------------------------------
# exponent search

class KroneckerPair(NamedTuple):
    k1: int
    k2: int
    error: Interval     # k1 log_a + k2 log_b - target


def kronecker_step(log_a: Interval, log_b: Interval, target: Interval, eps: Number,
                   bound: int, min_k: tuple = (0, 0)) -> KroneckerPair:
    """Pair (k1, k2) with min_k <= (k1, k2) <= bound minimizing |k1 a + k2 b - target|.

    The winner's error is certified below ``eps``; ties go to the smaller k1.
    """
    eps = as_rational(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if log_a.lo <= 0 or log_b.lo <= 0:
        raise ValueError("logs must be certified positive")
    m1, m2 = int(min_k[0]), int(min_k[1])
    if bound < max(m1, m2):
        raise NoPairWithinBound("bound below the minimal exponents")
    fa, fb, ft = float(log_a.mid), float(log_b.mid), float(target.mid)
    k1 = np.arange(m1, bound + 1, dtype=np.float64)
    k2f = (ft - k1 * fa) / fb
    cands = []
    for k2 in (np.floor(k2f), np.ceil(k2f)):
        k2 = np.clip(k2, m2, bound)
        err = np.abs(k1 * fa + k2 * fb - ft)
        cands.append((err, k2))
    err = np.minimum(cands[0][0], cands[1][0])
    slack = 1e-9 + 1e-15 * (abs(ft) + bound * (fa + fb))
    best = err.min()
    if best > float(eps) + slack:
        raise NoPairWithinBound(
            f"no pair within bound {bound}: closest error {best:.4g} >= {float(eps):.4g}")
    pool = set()
    for e, k2 in cands:
        for i in np.nonzero(e <= best + slack)[0]:
            pool.add((int(k1[i]), int(k2[i])))
    scored = []
    for p, q in pool:
        e = log_a * p + log_b * q - target
        scored.append((abs(e), p, q, e))
    win = scored[0]
    for s in scored[1:]:
        if s[0].hi < win[0].lo or (s[0].lo <= win[0].hi and s[0].mid < win[0].mid) \
                or (s[0].lo <= win[0].hi and s[0].mid == win[0].mid and s[1] < win[1]):
            win = s
    if not win[0].hi < eps:
        raise NoPairWithinBound(f"closest pair error {float(win[0].mid):.4g} not certified below {float(eps)}")
    return KroneckerPair(win[1], win[2], win[3])


# ---------------------------------------------------------------------------
# prime-power vectors

def default_tau(exponent: Number) -> Fraction:
    e = as_rational(exponent)
    return e + Fraction(1, 2 * (e + 1) ** 2)


def smith_divisors(rows: Sequence[Sequence[int]]) -> tuple:
    """Elementary divisors of a 2 x k integer matrix via determinantal divisors."""
    (r1, r2) = rows
    d1 = 0
    for x in list(r1) + list(r2):
        d1 = math.gcd(d1, x)
    d2 = 0
    k = len(r1)
    for i in range(k):
        for j in range(i + 1, k):
            d2 = math.gcd(d2, r1[i] * r2[j] - r1[j] * r2[i])
    if d1 == 0:
        return (0, 0)
    return (d1, d2 // d1 if d2 else 0)


@dataclass(frozen=True)
class PrimePowerState:
    exponent: Fraction          # target exponent n (or n/m)
    c: Fraction
    tau: Fraction
    mu: Fraction
    d2: Interval                # |e_2| in the height norm
    gamma: Interval             # repeated-row factor (1 for a single form)
    alpha: tuple
    gamma_exp: tuple
    beta: tuple
    delta: tuple
    eps0: Fraction = EPS0
    notes: tuple = ()

    kind = "prime-power"

    # derived integers -----------------------------------------------------
    @property
    def depth(self) -> int:
        return len(self.alpha)

    @property
    def A(self) -> tuple:
        return tuple(2 ** a * 3 ** g for a, g in zip(self.alpha, self.gamma_exp))

    @property
    def B(self) -> tuple:
        return tuple(5 ** b * 7 ** d for b, d in zip(self.beta, self.delta))

    @property
    def F(self) -> tuple:
        A = self.A
        return tuple(sum(A[j] // A[i] for i in range(j + 1)) for j in range(len(A)))

    @property
    def G(self) -> tuple:
        B = self.B
        return tuple(sum(B[j] // B[i] for i in range(j + 1)) for j in range(len(B)))

    @property
    def r(self) -> Interval:
        return r_value(self.c, self.d2, self.exponent, self.gamma)

    def v(self, j: int) -> tuple:
        """v_j = (A_j, 0, -F_j), j >= 1."""
        return (self.A[j - 1], 0, -self.F[j - 1])

    def w(self, j: int) -> tuple:
        """w_j = (0, B_j, -G_j), j >= 1."""
        return (0, self.B[j - 1], -self.G[j - 1])

    def forms(self, j: int) -> dict:
        """The six candidate best-approximation shapes attached to level j."""
        v, w = self.v(j), self.w(j)
        add = lambda x, y, s=1: tuple(a + s * b for a, b in zip(x, y))  # noqa: E731
        out = {"v_j": v, "w_j": w, "v_j+w_j": add(v, w), "w_j-v_j": add(w, v, -1)}
        if j < self.depth:
            v1 = self.v(j + 1)
            out["w_j+v_j+1"] = add(w, v1)
            out["v_j+1-w_j"] = add(v1, w, -1)
        return out

    def xi(self) -> tuple:
        d = self.digest
        return (SeriesReal([Fraction(1, a) for a in self.A], {"state": d, "coord": 0}),
                SeriesReal([Fraction(1, b) for b in self.B], {"state": d, "coord": 1}))

    # serialization ------------------------------------------------------
    def defining_json(self) -> dict:
        return {
            "kind": self.kind,
            "exponent": rational_str(self.exponent),
            "c": rational_str(self.c),
            "tau": rational_str(self.tau),
            "mu": rational_str(self.mu),
            "d2": self.d2.to_json(),
            "gamma": self.gamma.to_json(),
            "alpha": list(self.alpha),
            "gamma_exp": list(self.gamma_exp),
            "beta": list(self.beta),
            "delta": list(self.delta),
            "eps0": rational_str(self.eps0),
        }

    @property
    def digest(self) -> str:
        return digest_of(self.defining_json())

    def to_json(self) -> dict:
        d = self.defining_json()
        d.update(digest=self.digest, notes=list(self.notes),
                 A=[str(x) for x in self.A], B=[str(x) for x in self.B])
        return d

    @classmethod
    def from_json(cls, d: dict) -> "PrimePowerState":
        st = cls(as_rational(d["exponent"]), as_rational(d["c"]), as_rational(d["tau"]),
                 as_rational(d["mu"]), Interval.from_json(d["d2"]), Interval.from_json(d["gamma"]),
                 tuple(d["alpha"]), tuple(d["gamma_exp"]), tuple(d["beta"]), tuple(d["delta"]),
                 as_rational(d.get("eps0", EPS0)), tuple(d.get("notes", ())))
        bad = st.check()
        if bad:
            raise InvariantViolation("; ".join(bad))
        return st

    # invariants -----------------------------------------------------------
    def logs(self, bits: int = 96) -> dict:
        l2, l3, l5, l7 = (log_interval(p, bits) for p in (2, 3, 5, 7))
        return {
            "A": [l2 * a + l3 * g for a, g in zip(self.alpha, self.gamma_exp)],
            "B": [l5 * b + l7 * d for b, d in zip(self.beta, self.delta)],
            "r": log_interval_of(self.r, bits),
        }

    def check(self) -> list:
        """All exact invariants; returns a list of violations."""
        bad = []
        for name, seq in (("alpha", self.alpha), ("gamma", self.gamma_exp),
                          ("beta", self.beta), ("delta", self.delta)):
            if seq[0] < 1 or any(y <= x for x, y in zip(seq, seq[1:])):
                bad.append(f"{name} exponents not strictly increasing positive")
        A, B, F, G = self.A, self.B, self.F, self.G
        chain = [x for pair in zip(A, B) for x in pair]
        if not 1 < chain[0] or any(y <= x for x, y in zip(chain, chain[1:])):
            bad.append("interleaving 1 < A_1 < B_1 < A_2 < ... fails")
        for j in range(self.depth):
            if F[j] % 6 != 1:
                bad.append(f"F_{j + 1} != 1 mod 6")
            if G[j] % 35 != 1:
                bad.append(f"G_{j + 1} != 1 mod 35")
            if math.gcd(A[j], F[j]) != 1 or math.gcd(B[j], G[j]) != 1:
                bad.append(f"coprimality fails at level {j + 1}")
            if smith_divisors((self.v(j + 1), self.w(j + 1))) != (1, 1):
                bad.append(f"lattice spanned by v_{j + 1}, w_{j + 1} is not saturated")
        for j, ok in self.power_law_checks().items():
            if not ok:
                bad.append(f"power law {j} outside tolerance")
        return bad

    def power_law_checks(self) -> dict:
        """Certified log-scale tolerance checks for the non-seed relations.

        ``A[j+1]`` (j >= 1): |log A_{j+1} - log r - tau log B_j| < eps_j.
        ``B[j]`` (j >= 2): |log B_j - mu log A_j| < eps_j.
        """
        lg = self.logs()
        out = {}
        for j in range(1, self.depth):
            e = lg["A"][j] - lg["r"] - lg["B"][j - 1] * self.tau
            out[f"A[{j + 1}]"] = abs(e).hi < eps_schedule(j, self.eps0)
        for j in range(2, self.depth + 1):
            e = lg["B"][j - 1] - lg["A"][j - 1] * self.mu
            out[f"B[{j}]"] = abs(e).hi < eps_schedule(j, self.eps0)
        return out

    def ratio_checks(self, bits: int = 96) -> list:
        """Certified ratios A_{j+1}/(r B_j^tau) and B_j/A_j^mu with their tolerance."""
        lg = self.logs(bits)
        rows = []
        for j in range(1, self.depth):
            e = lg["A"][j] - lg["r"] - lg["B"][j - 1] * self.tau
            rows.append(("A", j + 1, _exp_interval(e), eps_schedule(j, self.eps0)))
        for j in range(2, self.depth + 1):
            e = lg["B"][j - 1] - lg["A"][j - 1] * self.mu
            rows.append(("B", j, _exp_interval(e), eps_schedule(j, self.eps0)))
        return rows

    def calibration(self, j: int, bits: int = 96) -> Interval:
        """Certified |v_j . xi*| * |w_j hat|^n / c; close to 1 once j >= 2.

        Needs levels j+1 and j+2 so that the tail after A_{j+1} is bounded.
        """
        if not 1 <= j <= self.depth - 2:
            raise ValueError("calibration at level j needs levels j+1 and j+2")
        A = self.A
        tail = SeriesReal([Fraction(A[j - 1], a) for a in A[j:]]).enclosure(len(A) - j - 1)
        e = self.exponent
        if e.denominator == 1:
            wn = (self.d2 * self.B[j - 1]) ** int(e)
        else:
            wn = _exp_interval((log_interval(self.B[j - 1], bits) + log_interval_of(self.d2, bits)) * e)
        return tail * wn / self.c


def r_value(c: Fraction, d2: Interval, exponent: Fraction, gamma: Interval) -> Interval:
    """r = d2^n / (c * gamma)."""
    if exponent.denominator == 1:
        dn = d2 ** int(exponent)
    else:
        dn = _exp_interval(log_interval_of(d2, 96) * exponent)
    return dn / (gamma * c)


def _exp_interval(x: Interval, bits: int = 96) -> Interval:
    """Certified exp on an interval of moderate size (|x| < 2**20)."""
    return Interval(_exp_bound(x.lo, bits, False), _exp_bound(x.hi, bits, True))


def _exp_bound(q: Fraction, bits: int, upper: bool) -> Fraction:
    # exp(q) = exp(q / 2^s)^(2^s) with |q / 2^s| <= 1/2, Taylor with remainder
    q = Fraction(q)
    s = max(0, math.ceil(math.log2(abs(float(q)) + 1e-300)) + 1) if q else 0
    y = q / (1 << s)
    prec = Fraction(1, 1 << (bits + s + 8))
    total, term, k = Fraction(1), Fraction(1), 1
    while True:
        term = term * y / k
        total += term
        k += 1
        if abs(term) < prec:
            break
    # remainder bounded by 2|term * y / k|
    rem = 2 * abs(term * y / k)
    total = total + rem if upper else total - rem
    den = 1 << (bits + s + 8)
    total = Fraction(math.ceil(total * den) if upper else math.floor(total * den), den)
    for _ in range(s):
        total = total * total
        total = Fraction(math.ceil(total * den) if upper else math.floor(total * den), den)
    return total


def admissibility_bound(exponent: Fraction) -> Optional[Interval]:
    """Upper bound on c for which the extension argument applies (integral exponents >= 4)."""
    if exponent.denominator != 1 or exponent < 4:
        return None
    from .constants import cn_threshold
    return cn_threshold(int(exponent)).interval


def build_prime_power(n_over_m: Number = 4, c: Number = Fraction(1, 25), tau: Optional[Number] = None,
                      levels: int = 3, norm: Optional[NormDescriptor] = None,
                      gamma: Number | Interval = 1, seeds: tuple = (1, 1, 1, 1),
                      eps0: Number = EPS0, bit_cap: int = DEFAULT_BIT_CAP) -> PrimePowerState:
    """Exponent search for A_j = 2^alpha_j 3^gamma_j and B_j = 5^beta_j 7^delta_j.

    Level 1 is the seed (A_1, B_1) = (2^a 3^g, 5^b 7^d) from ``seeds``; every
    later level is chosen by ``kronecker_step`` with tolerance eps_j / 2 so
    that A_{j+1} ~ r B_j^tau and B_j ~ A_j^mu hold within eps_j.
    ``norm`` is the height norm on R^2 (defaults to the max norm); ``gamma``
    is the repeated-row factor entering r.
    """
    e = as_rational(n_over_m)
    c = as_rational(c)
    if e <= 0 or c <= 0:
        raise ValueError("exponent and c must be positive")
    tau = default_tau(e) if tau is None else as_rational(tau)
    if tau <= e:
        raise ValueError("tau must exceed the exponent")
    mu = 1 / (tau - e)
    if not mu > tau ** 2:
        raise ValueError(f"infeasible parameters: mu = {mu} <= tau^2 = {tau ** 2}")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    norm = norm or max_norm(2)
    d2 = norm.eval((0, 1))
    gamma = gamma if isinstance(gamma, Interval) else Interval.point(as_rational(gamma))
    eps0 = as_rational(eps0)
    notes = []
    bound_c = admissibility_bound(e)
    if bound_c is None:
        notes.append("no theoretical admissibility bound on c for this exponent")
    elif not c < bound_c.lo:
        notes.append(f"c = {c} is not below the admissibility bound {float(bound_c.mid):.6f}")
    r = r_value(c, d2, e, gamma)
    al, ga, be, de = ([s] for s in seeds)
    A1, B1 = 2 ** al[0] * 3 ** ga[0], 5 ** be[0] * 7 ** de[0]
    if not 1 < A1 < B1:
        raise ValueError("seeds must satisfy 1 < A_1 < B_1")
    for j in range(1, levels):
        eps = eps_schedule(j, eps0)
        # the size of the target fixes the log precision needed
        size = abs(math.log(float(r.mid))) + float(tau) * (be[-1] * math.log(5) + de[-1] * math.log(7))
        bits = 72 + 2 * max(1, int(size)).bit_length()
        l2, l3, l5, l7 = (log_interval(p, bits) for p in (2, 3, 5, 7))
        lr = log_interval_of(r, bits)
        target = lr + (l5 * be[-1] + l7 * de[-1]) * tau
        if float(target.hi) / math.log(2) > bit_cap:
            raise LevelBudgetExceeded(f"A_{j + 1} would exceed {bit_cap} bits")
        bound = int(float(target.hi) / math.log(2)) + 2
        p = kronecker_step(l2, l3, target, eps / 2, bound, (al[-1] + 1, ga[-1] + 1))
        al.append(p.k1)
        ga.append(p.k2)
        eps = eps_schedule(j + 1, eps0)
        target = (l2 * p.k1 + l3 * p.k2) * mu
        bits2 = 72 + 2 * max(1, int(float(target.hi))).bit_length()
        if bits2 > bits:
            l2, l3, l5, l7 = (log_interval(q, bits2) for q in (2, 3, 5, 7))
            target = (l2 * p.k1 + l3 * p.k2) * mu
        if float(target.hi) / math.log(2) > bit_cap:
            raise LevelBudgetExceeded(f"B_{j + 1} would exceed {bit_cap} bits")
        bound = int(float(target.hi) / math.log(5)) + 2
        q = kronecker_step(l5, l7, target, eps / 2, bound, (be[-1] + 1, de[-1] + 1))
        be.append(q.k1)
        de.append(q.k2)
    notes.append("seed level exempt from the power laws")
    st = PrimePowerState(e, c, tau, mu, d2, gamma, tuple(al), tuple(ga), tuple(be), tuple(de),
                         eps0, tuple(notes))
    bad = st.check()
    if bad:
        raise InvariantViolation("; ".join(bad))
    for msg in notes:
        if "exempt" not in msg:
            warnings.warn(msg, ConstructionWarning, stacklevel=2)
    return st


# ---------------------------------------------------------------------------
# sign-varied rows

@dataclass(frozen=True)
class SignVariedState:
    base: PrimePowerState
    m: int
    signs: tuple            # signs[k][j] for the A-series of row k
    signs_star: tuple       # signs_star[k][j] for the B-series
    sign_seed: Optional[int] = None

    kind = "sign-varied"

    def F(self, k: int) -> tuple:
        A, s = self.base.A, self.signs[k]
        return tuple(sum(s[i] * (A[j] // A[i]) for i in range(j + 1)) for j in range(len(A)))

    def G(self, k: int) -> tuple:
        B, s = self.base.B, self.signs_star[k]
        return tuple(sum(s[i] * (B[j] // B[i]) for i in range(j + 1)) for j in range(len(B)))

    def rows(self) -> tuple:
        d = self.digest
        out = []
        for k in range(self.m):
            x1 = SeriesReal([Fraction(s, a) for s, a in zip(self.signs[k], self.base.A)],
                            {"state": d, "coord": [k, 0]})
            x2 = SeriesReal([Fraction(s, b) for s, b in zip(self.signs_star[k], self.base.B)],
                            {"state": d, "coord": [k, 1]})
            out.append((x1, x2))
        return tuple(out)

    def patterns(self) -> dict:
        """Column sign patterns that occurred, per series."""
        depth = self.base.depth
        return {
            "A": sorted({tuple(self.signs[k][j] for k in range(self.m)) for j in range(depth)}),
            "B": sorted({tuple(self.signs_star[k][j] for k in range(self.m)) for j in range(depth)}),
        }

    def gamma(self, norm2: Optional[NormDescriptor] = None) -> Interval:
        """Largest norm of an observed sign pattern (finite-depth stand-in for Gamma)."""
        norm2 = norm2 or max_norm(self.m)
        vals = [norm2.eval(p) for pats in self.patterns().values() for p in pats]
        return Interval(max(v.lo for v in vals), max(v.hi for v in vals))

    def defining_json(self) -> dict:
        return {"kind": self.kind, "base": self.base.defining_json(), "m": self.m,
                "signs": [list(s) for s in self.signs],
                "signs_star": [list(s) for s in self.signs_star]}

    @property
    def digest(self) -> str:
        return digest_of(self.defining_json())

    def to_json(self) -> dict:
        d = self.defining_json()
        d["base"] = self.base.to_json()
        d.update(digest=self.digest, sign_seed=self.sign_seed, patterns=self.patterns())
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SignVariedState":
        st = cls(PrimePowerState.from_json(d["base"]), int(d["m"]),
                 tuple(tuple(s) for s in d["signs"]), tuple(tuple(s) for s in d["signs_star"]),
                 d.get("sign_seed"))
        bad = st.check()
        if bad:
            raise InvariantViolation("; ".join(bad))
        return st

    def check(self) -> list:
        bad = []
        for k in range(self.m):
            if any(f % 6 not in (1, 5) for f in self.F(k)):
                bad.append(f"row {k + 1}: F not +-1 mod 6")
            if any(g % 35 not in (1, 34) for g in self.G(k)):
                bad.append(f"row {k + 1}: G not +-1 mod 35")
        return bad


def sign_streams(m: int, depth: int, seed: int) -> tuple:
    """Deterministic +-1 streams: rows k of (signs, signs_star) from Philox keyed by (seed, k)."""
    out_a, out_b = [], []
    for k in range(m):
        g = np.random.Generator(np.random.Philox(key=[int(seed), k]))
        bits = g.integers(0, 2, size=(2, depth))
        out_a.append(tuple(int(1 - 2 * b) for b in bits[0]))
        out_b.append(tuple(int(1 - 2 * b) for b in bits[1]))
    return tuple(out_a), tuple(out_b)


def build_sign_varied(base: PrimePowerState, m: int, sign_seed: Optional[int] = 0,
                      signs: Optional[Sequence[Sequence[int]]] = None,
                      signs_star: Optional[Sequence[Sequence[int]]] = None) -> SignVariedState:
    """Rows (sum_j s_kj / A_j, sum_j s*_kj / B_j), k = 1..m.

    Explicit ``signs``/``signs_star`` (m rows of +-1, one entry per level)
    override the seeded streams.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    depth = base.depth
    if signs is None or signs_star is None:
        sa, sb = sign_streams(m, depth, 0 if sign_seed is None else sign_seed)
        signs = sa if signs is None else signs
        signs_star = sb if signs_star is None else signs_star
    else:
        sign_seed = None
    signs = tuple(tuple(int(s) for s in row) for row in signs)
    signs_star = tuple(tuple(int(s) for s in row) for row in signs_star)
    for rows in (signs, signs_star):
        if len(rows) != m or any(len(r) != depth or any(s not in (-1, 1) for s in r) for r in rows):
            raise ValueError(f"sign arrays must be {m} rows of {depth} entries in {{-1, 1}}")
    st = SignVariedState(base, m, signs, signs_star, sign_seed)
    bad = st.check()
    if bad:
        raise InvariantViolation("; ".join(bad))
    return st


# ---------------------------------------------------------------------------
# matrix compositions

KINDS = ("RepeatedRowV", "BlockDiagonal", "ExtendColumns", "Transpose")


@dataclass(frozen=True)
class MatrixBuild:
    kind: str
    rows: tuple
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def shape(self) -> tuple:
        return (len(self.rows), len(self.rows[0]))

    def problem(self, norm1: Optional[NormDescriptor] = None, norm2: Optional[NormDescriptor] = None):
        from .bestapprox import ApproxProblem
        return ApproxProblem.of(self.rows, norm1, norm2)

    def check(self) -> list:
        bad = []
        if self.kind == "RepeatedRowV" and any(r != self.rows[0] for r in self.rows):
            bad.append("repeated rows differ")
        if self.kind == "BlockDiagonal":
            for (i, j) in self.meta.get("zeros", ()):
                if self.rows[i][j].rational_value != 0:
                    bad.append(f"entry ({i}, {j}) off the blocks is not zero")
        return bad


def _matrix(x) -> tuple:
    if isinstance(x, MatrixBuild):
        return x.rows
    if isinstance(x, (ExactReal, int, Fraction, str)):
        return ((as_exact(x),),)
    rows = list(x)
    if rows and not isinstance(rows[0], (list, tuple)):
        rows = [rows]
    out = tuple(tuple(as_exact(v) for v in r) for r in rows)
    if not out or not out[0] or any(len(r) != len(out[0]) for r in out):
        raise ValueError("shape mismatch: ragged or empty matrix")
    return out


def repeated_row(xi: Sequence, m: int) -> MatrixBuild:
    row = tuple(as_exact(x) for x in xi)
    if m < 1:
        raise ValueError("m must be >= 1")
    return MatrixBuild("RepeatedRowV", tuple(row for _ in range(m)), {"m": m, "n": len(row)})


def block_diagonal(blocks: Sequence) -> MatrixBuild:
    mats = [_matrix(b) for b in blocks]
    if not mats:
        raise ValueError("no blocks")
    m = sum(len(b) for b in mats)
    n = sum(len(b[0]) for b in mats)
    zero = as_exact(0)
    rows = [[zero] * n for _ in range(m)]
    zeros = []
    spans = []
    r0 = c0 = 0
    for b in mats:
        h, w = len(b), len(b[0])
        spans.append(((r0, r0 + h), (c0, c0 + w)))
        for i in range(h):
            for j in range(w):
                rows[r0 + i][c0 + j] = b[i][j]
        r0 += h
        c0 += w
    for i in range(m):
        for j in range(n):
            if not any(a <= i < b and c <= j < d for (a, b), (c, d) in spans):
                zeros.append((i, j))
    return MatrixBuild("BlockDiagonal", tuple(map(tuple, rows)), {"blocks": spans, "zeros": tuple(zeros)})


def extend_columns(V, B) -> MatrixBuild:
    v, b = _matrix(V), _matrix(B)
    if len(v) != len(b):
        raise ValueError(f"shape mismatch: {len(v)} rows vs {len(b)} rows")
    rows = tuple(tuple(x) + tuple(y) for x, y in zip(v, b))
    return MatrixBuild("ExtendColumns", rows, {"left_cols": len(v[0]), "right_cols": len(b[0])})


def transpose(M) -> MatrixBuild:
    a = _matrix(M)
    rows = tuple(tuple(a[j][i] for j in range(len(a))) for i in range(len(a[0])))
    return MatrixBuild("Transpose", rows, {"source_shape": (len(a), len(a[0]))})


def compose(kind: str, *parts, **kw) -> MatrixBuild:
    """Dispatch on the composition kind: RepeatedRowV(xi, m), BlockDiagonal(*blocks),
    ExtendColumns(V, B), Transpose(M)."""
    if kind == "RepeatedRowV":
        out = repeated_row(parts[0], kw.get("m", parts[1] if len(parts) > 1 else 1))
    elif kind == "BlockDiagonal":
        out = block_diagonal(parts[0] if len(parts) == 1 and isinstance(parts[0], list) else parts)
    elif kind == "ExtendColumns":
        out = extend_columns(*parts)
    elif kind == "Transpose":
        out = transpose(parts[0])
    else:
        raise ValueError(f"unknown composition {kind!r}; expected one of {KINDS}")
    bad = out.check()
    if bad:
        raise InvariantViolation("; ".join(bad))
    return out


# ---------------------------------------------------------------------------
# random extensions

def sample_extension(dims: int | tuple, prng_seed: int, grid_bits: int = 20) -> tuple:
    """Uniform point of the grid 2^-grid_bits Z^d inside the closed Euclidean unit ball.

    ``dims`` is an integer or a (rows, cols) shape; the result is a flat tuple
    of Fractions (or a tuple of row tuples for a shape).  Rejection sampling
    over the cube with a Philox stream keyed by the seed.
    """
    shape = (dims,) if isinstance(dims, int) else tuple(dims)
    d = int(np.prod(shape))
    if d < 1:
        raise ValueError("dims must be >= 1")
    g = np.random.Generator(np.random.Philox(key=int(prng_seed)))
    N = 1 << grid_bits
    lim = N * N
    while True:
        x = [int(v) for v in g.integers(-N, N, size=d, endpoint=True)]
        if sum(v * v for v in x) <= lim:
            break
    vals = tuple(Fraction(v, N) for v in x)
    if len(shape) == 1:
        return vals
    return tuple(vals[i * shape[1]:(i + 1) * shape[1]] for i in range(shape[0]))


def state_from_json(d: dict):
    kind = d.get("kind")
    if kind == "two-scale":
        return TwoScaleState.from_json(d)
    if kind == "prime-power":
        return PrimePowerState.from_json(d)
    if kind == "sign-varied":
        return SignVariedState.from_json(d)
    raise ValueError(f"unknown construction kind {kind!r}")


def state_rows(state) -> tuple:
    """The matrix rows (as ExactReals) a construction state defines."""
    if isinstance(state, SignVariedState):
        return state.rows()
    return (state.xi(),)


__all__ = [
    "ConstructionWarning", "LevelBudgetExceeded", "NoPairWithinBound", "InvariantViolation",
    "TwoScaleState", "build_two_scale", "KroneckerPair", "kronecker_step", "default_tau",
    "smith_divisors", "PrimePowerState", "build_prime_power", "admissibility_bound", "r_value",
    "SignVariedState", "build_sign_varied", "sign_streams", "MatrixBuild", "compose",
    "repeated_row", "block_diagonal", "extend_columns", "transpose", "sample_extension",
    "eps_schedule", "digest_of", "state_from_json", "state_rows",
]
