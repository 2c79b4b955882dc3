"""Closed-form constants: extension thresholds c_n, ball volumes, the covering
bound for exceptional extensions, and Dirichlet constants for norm pairs.

Quantities built from pi and square roots are carried exactly as finite sums
of monomials  q * pi^(e/2) * sqrt(s)  (q rational, e integer, s squarefree)
and only turned into intervals on request.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .exactnum import Interval, Number, as_rational, pi_interval, root_interval, sqrt_interval
from .normspace import NormDescriptor, max_norm

DEFAULT_BITS = 96


def _squarefree(n: int) -> tuple[int, int]:
    """n = k^2 * s with s squarefree; returns (k, s)."""
    if n <= 0:
        raise ValueError("need a positive integer")
    k, s, p = 1, 1, 2
    while p * p <= n:
        while n % (p * p) == 0:
            n //= p * p
            k *= p
        if n % p == 0:
            n //= p
            s *= p
        p += 1
    return k, s * n


class Symbolic:
    """Exact real of the form  sum q_i * pi^(e_i/2) * sqrt(s_i)."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        self.terms = {k: Fraction(v) for k, v in (terms or {}).items() if v != 0}

    # constructors
    @classmethod
    def rational(cls, q: Number) -> "Symbolic":
        return cls({(0, 1): as_rational(q)})

    @classmethod
    def sqrt(cls, n: Number) -> "Symbolic":
        q = as_rational(n)
        if q < 0:
            raise ValueError("sqrt of a negative number")
        if q == 0:
            return cls()
        # sqrt(a/b) = sqrt(a b) / b
        k, s = _squarefree(q.numerator * q.denominator)
        return cls({(0, s): Fraction(k, q.denominator)})

    @classmethod
    def pi_power(cls, e: int) -> "Symbolic":
        """pi^(e/2)."""
        return cls({(int(e), 1): Fraction(1)})

    # arithmetic
    def __add__(self, other):
        other = _sym(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, Fraction(0)) + v
        return Symbolic(out)

    __radd__ = __add__

    def __neg__(self):
        return Symbolic({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-_sym(other))

    def __rsub__(self, other):
        return _sym(other) - self

    def __mul__(self, other):
        other = _sym(other)
        out: dict = {}
        for (e1, s1), a in self.terms.items():
            for (e2, s2), b in other.terms.items():
                k, s = _squarefree(s1 * s2)
                key = (e1 + e2, s)
                out[key] = out.get(key, Fraction(0)) + a * b * k
        return Symbolic(out)

    __rmul__ = __mul__

    def inverse(self) -> "Symbolic":
        if len(self.terms) != 1:
            raise ZeroDivisionError("only monomials can be inverted exactly")
        (e, s), q = next(iter(self.terms.items()))
        # 1/(q pi^(e/2) sqrt s) = sqrt(s) / (q s) * pi^(-e/2)
        return Symbolic({(-e, s): 1 / (q * s)})

    def __truediv__(self, other):
        return self * _sym(other).inverse()

    def __rtruediv__(self, other):
        return _sym(other) * self.inverse()

    def __eq__(self, other):
        try:
            return self.terms == _sym(other).terms
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    @property
    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def interval(self, bits: int = DEFAULT_BITS) -> Interval:
        pi = pi_interval(bits + 16)
        spi = Interval(root_interval(pi.lo, 2, bits + 16).lo, root_interval(pi.hi, 2, bits + 16).hi)
        total = Interval.point(0)
        for (e, s), q in sorted(self.terms.items()):
            x = Interval.point(q)
            p = pi ** (abs(e) // 2)
            if e % 2:
                p = p * spi
            x = x * p if e >= 0 else x / p
            if s != 1:
                x = x * sqrt_interval(s, bits + 16)
            total = total + x
        return total

    def __float__(self):
        return float(self.interval(64).mid)

    def __repr__(self):
        parts = []
        for (e, s), q in sorted(self.terms.items()):
            f = str(q)
            if e:
                f += f"*pi^({e}/2)" if e % 2 else (f"*pi^{e // 2}" if e != 2 else "*pi")
            if s != 1:
                f += f"*sqrt({s})"
            parts.append(f)
        return " + ".join(parts) or "0"

    def to_json(self):
        return {"terms": [[e, s, str(q)] for (e, s), q in sorted(self.terms.items())], "repr": repr(self)}


def _sym(x) -> Symbolic:
    if isinstance(x, Symbolic):
        return x
    if isinstance(x, (int, Fraction, str)):
        return Symbolic.rational(x)
    raise TypeError(f"cannot make {x!r} symbolic")


@dataclass(frozen=True)
class ClosedForm:
    symbolic: Symbolic
    label: str = ""

    @property
    def interval(self) -> Interval:
        return self.symbolic.interval()

    def __float__(self):
        return float(self.symbolic)

    def to_json(self) -> dict:
        iv = self.interval
        return {"label": self.label, "symbolic": self.symbolic.to_json(),
                "lo": f"{float(iv.lo):.17g}", "hi": f"{float(iv.hi):.17g}"}


# ---------------------------------------------------------------------------
# Gamma at integers and half-integers

def double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def gamma_half(k: int) -> Symbolic:
    """Gamma(k/2) for integer k >= 1, exactly."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k % 2 == 0:
        return Symbolic.rational(math.factorial(k // 2 - 1))
    # Gamma(j + 1/2) = (2j-1)!! sqrt(pi) / 2^j with j = (k-1)/2
    j = (k - 1) // 2
    return Symbolic({(1, 1): Fraction(double_factorial(2 * j - 1), 2 ** j)})


def half_gamma_identity(n: int) -> bool:
    """Gamma(n - 1/2) * 2^(n-1) == (2n-3)!! sqrt(pi), checked symbolically."""
    lhs = gamma_half(2 * n - 1) * (2 ** (n - 1))
    rhs = Symbolic({(1, 1): Fraction(double_factorial(2 * n - 3))})
    return lhs == rhs


def ball_volume(k: int) -> ClosedForm:
    """Lebesgue measure of the Euclidean unit ball in R^k: pi^(k/2) / Gamma(k/2 + 1)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return ClosedForm(Symbolic.rational(1), "ball_volume(0)")
    return ClosedForm(Symbolic.pi_power(k) / gamma_half(k + 2), f"ball_volume({k})")


# ---------------------------------------------------------------------------
# thresholds

def cn_threshold(n: int) -> ClosedForm:
    """c_n = (n-3) / (8 (n-2)^(3/2)) * sqrt(pi) * Gamma(n - 1/2) / Gamma(n)."""
    if n < 4:
        raise ValueError("c_n is defined for n >= 4")
    s = Symbolic.rational(Fraction(n - 3, 8 * (n - 2))) / Symbolic.sqrt(n - 2)
    s = s * Symbolic.pi_power(1) * gamma_half(2 * n - 1) / gamma_half(2 * n)
    return ClosedForm(s, f"c_{n} (Gamma form)")


def cn_threshold_ball(n: int) -> ClosedForm:
    """(n-3) / (4 (2n-4) sqrt(n-2)) * vol(B_{n-2}) / vol(B_{n-3})."""
    if n < 4:
        raise ValueError("c_n is defined for n >= 4")
    s = Symbolic.rational(Fraction(n - 3, 4 * (2 * n - 4))) / Symbolic.sqrt(n - 2)
    s = s * ball_volume(n - 2).symbolic / ball_volume(n - 3).symbolic
    return ClosedForm(s, f"c_{n} (ball-volume form)")


def cn_forms_agree(n: int) -> bool:
    return cn_threshold(n).symbolic == cn_threshold_ball(n).symbolic


def covering_bound_symbolic(n: int, eps: Number, eps2: Number, LT: Symbolic | Number,
                            C: Number = 1) -> Symbolic:
    """2(2n-4)(2 sqrt(n-2) + 2 eps) vol'(B_{n-3}) (1/(n-3) + eps2) * L T^n * C, exactly."""
    if n < 4:
        raise ValueError("the covering bound needs n >= 4")
    eps, eps2 = as_rational(eps), as_rational(eps2)
    if eps < 0 or eps2 < 0:
        raise ValueError("eps, eps2 must be >= 0")
    f = Symbolic.rational(2 * (2 * n - 4)) * (2 * Symbolic.sqrt(n - 2) + 2 * eps)
    f = f * ball_volume(n - 3).symbolic * (Fraction(1, n - 3) + eps2)
    return f * _sym(LT) * as_rational(C)


def covering_bound(n: int, eps: Number, eps2: Number, L_v, T_v: Number, C: Number = 1,
                   bits: int = DEFAULT_BITS) -> Interval:
    """Certified value of the covering bound for given L_v (rational or interval) and T_v."""
    L = L_v if isinstance(L_v, Interval) else Interval.point(as_rational(L_v))
    if L.lo < 0:
        raise ValueError("L_v must be >= 0")
    factor = covering_bound_symbolic(n, eps, eps2, 1, C).interval(bits)
    return factor * L * (as_rational(T_v) ** n)


def survival_floor(n: int, L_v, T_v: Number, C: Number = 1) -> Optional[Interval]:
    """1 - covering_bound / vol(B_{n-2}); None below n = 4 (no theoretical floor)."""
    if n < 4:
        return None
    return 1 - covering_bound(n, 0, 0, L_v, T_v, C) / ball_volume(n - 2).interval


# ---------------------------------------------------------------------------
# Dirichlet constants

@dataclass(frozen=True)
class Exact:
    value: Fraction
    reason: str = ""

    def to_json(self):
        return {"kind": "exact", "value": str(self.value), "reason": self.reason}


@dataclass(frozen=True)
class EmpiricalUpper:
    value: Interval
    trials: int
    heights: int
    label: str = "empirical sweep, not a proof"

    def to_json(self):
        return {"kind": "empirical", "lo": float(self.value.lo), "hi": float(self.value.hi),
                "trials": self.trials, "heights": self.heights, "label": self.label}


def dirichlet_D(norm1: NormDescriptor, norm2: NormDescriptor, trials: int = 20,
                max_height: int = 40, seed: int = 0, denominator: int = 997):
    """D for the pair (norm1 on R^n, norm2 on R^m).

    Max/max pairs (including |.| on R^1) return Exact(1).  Otherwise a sweep
    over random rational matrices records the largest observed t^(n/m) psi(t)
    over integer t in [max_height/2, max_height]; labeled as evidence only.
    """
    n, m = norm1.dimension, norm2.dimension
    if _is_max(norm1) and _is_max(norm2):
        return Exact(Fraction(1), "Minkowski linear forms theorem, attained almost everywhere")
    from .bestapprox import ApproxProblem, best_approx_sequence, step_value

    g = np.random.Generator(np.random.Philox(key=int(seed)))
    best = None
    e = Fraction(n, m)
    for _ in range(trials):
        rows = [[Fraction(int(g.integers(1, denominator)), denominator) for _ in range(n)] for _ in range(m)]
        prob = ApproxProblem.of(rows, norm1, norm2)
        recs = best_approx_sequence(prob, max_height)
        for t in range(max(1, max_height // 2), max_height + 1):
            v = step_value(recs, t)
            val = v * _pow_interval(t, e)
            best = val if best is None else best.max(val)
    return EmpiricalUpper(best, trials, max_height)


def _pow_interval(t: int, e: Fraction) -> Interval:
    if e.denominator == 1:
        return Interval.point(Fraction(t) ** int(e))
    return root_interval(Fraction(t) ** e.numerator, e.denominator, 64)


def _is_max(norm: NormDescriptor) -> bool:
    if norm.kind == "max":
        return True
    if norm.dimension == 1:
        # every absolute norm on R^1 is a multiple of |x|; only the unit multiple is max
        return norm.eval((1,)) == Interval.point(1)
    return False


def parse_range(text: str) -> list:
    """'4..12' or '4,5,9' -> list of ints."""
    out = []
    for part in text.split(","):
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part.strip():
            out.append(int(part))
    return out


__all__ = [
    "Symbolic", "ClosedForm", "gamma_half", "half_gamma_identity", "double_factorial",
    "ball_volume", "cn_threshold", "cn_threshold_ball", "cn_forms_agree",
    "covering_bound", "covering_bound_symbolic", "survival_floor",
    "Exact", "EmpiricalUpper", "dirichlet_D", "parse_range",
]
