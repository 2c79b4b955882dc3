"""Exact rationals, outward-rounded rational intervals and lazily refined reals.

Every numeric quantity in the package is either a :class:`fractions.Fraction`
or an :class:`Interval` with Fraction endpoints.  Irrational inputs are
:class:`ExactReal` objects that can be evaluated to any requested width; the
result is always an interval that provably contains the true value.

Transcendental helpers (``pi_interval``, ``log_interval``, ``sqrt_interval``,
``root_interval``) work in fixed-point integer arithmetic with explicit error
accounting, so their outputs are certified enclosures as well.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

Rational = Fraction
Number = Union[int, Fraction]


class Indeterminate(ArithmeticError):
    """An interval operation cannot be decided at the current width."""


class InsufficientLevels(ArithmeticError):
    """A series-defined real has too few computed terms for the requested width."""


class Order(enum.Enum):
    LESS = "less"
    GREATER = "greater"
    OVERLAP = "overlap"


def as_rational(x) -> Fraction:
    """Coerce ints, Fractions, exact floats and strings like ``"3/7"`` or ``"1e-12"``."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a rational")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot interpret {x!r} as a rational")


def rational_str(q: Number) -> str:
    q = as_rational(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _floor(q: Fraction) -> int:
    return q.numerator // q.denominator


def _ceil(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


def bits_for_width(width: Number) -> int:
    """Smallest p >= 0 with 2**-p <= width."""
    w = as_rational(width)
    if w <= 0:
        raise ValueError("width must be positive")
    if w >= 1:
        return 0
    p = max(0, (w.denominator // w.numerator).bit_length() - 1)
    while Fraction(1, 1 << p) > w:
        p += 1
    return p


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = as_rational(self.lo), as_rational(self.hi)
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x: Number) -> "Interval":
        x = as_rational(x)
        return cls(x, x)

    @classmethod
    def hull(cls, items: Iterable["Interval"]) -> "Interval":
        items = list(items)
        return cls(min(i.lo for i in items), max(i.hi for i in items))

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        x = as_rational(x)
        return self.lo <= x <= self.hi

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        o = _coerce(other)
        return Interval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        o = _coerce(other)
        return Interval(self.lo - o.hi, self.hi - o.lo)

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        o = _coerce(other)
        if self.is_point and o.is_point:
            return Interval.point(self.lo * o.lo)
        p = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(min(p), max(p))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _coerce(other)
        if o.lo <= 0 <= o.hi:
            raise Indeterminate("division by an interval containing 0")
        return self * Interval(1 / o.hi, 1 / o.lo)

    def __rtruediv__(self, other):
        return _coerce(other) / self

    def __abs__(self):
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(Fraction(0), max(-self.lo, self.hi))

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers")
        if k == 0:
            return Interval.point(1)
        if k % 2 == 1 or self.lo >= 0:
            return Interval(self.lo ** k, self.hi ** k)
        if self.hi <= 0:
            return Interval(self.hi ** k, self.lo ** k)
        return Interval(Fraction(0), max(self.lo ** k, self.hi ** k))

    def floor(self) -> int:
        a, b = _floor(self.lo), _floor(self.hi)
        if a != b:
            raise Indeterminate(f"floor undecided on [{self.lo}, {self.hi}]")
        return a

    def ceil(self) -> int:
        a, b = _ceil(self.lo), _ceil(self.hi)
        if a != b:
            raise Indeterminate(f"ceil undecided on [{self.lo}, {self.hi}]")
        return a

    def max(self, other) -> "Interval":
        o = _coerce(other)
        return Interval(max(self.lo, o.lo), max(self.hi, o.hi))

    def min(self, other) -> "Interval":
        o = _coerce(other)
        return Interval(min(self.lo, o.lo), min(self.hi, o.hi))

    def round_out(self, bits: int) -> "Interval":
        """Enlarge to dyadic endpoints with denominator 2**bits."""
        s = 1 << bits
        return Interval(Fraction(_floor(self.lo * s), s), Fraction(_ceil(self.hi * s), s))

    def compact(self, bits: int = 128, limit: int = 512) -> "Interval":
        """Outward rounding of endpoints longer than ``limit`` bits to ``bits``
        significant bits; short endpoints are kept exactly."""
        return Interval(_round_rel(self.lo, bits, limit, _floor), _round_rel(self.hi, bits, limit, _ceil))

    def to_json(self) -> dict:
        return {"lo": rational_str(self.lo), "hi": rational_str(self.hi)}

    @classmethod
    def from_json(cls, d: dict) -> "Interval":
        return cls(as_rational(d["lo"]), as_rational(d["hi"]))

    def __float__(self) -> float:
        return float(self.mid)

    def __repr__(self) -> str:
        if self.is_point:
            return f"Interval({rational_str(self.lo)})"
        return f"Interval([{float(self.lo):.12g}, {float(self.hi):.12g}])"


def _round_rel(x: Fraction, bits: int, limit: int, rnd) -> Fraction:
    if x == 0 or x.numerator.bit_length() + x.denominator.bit_length() <= limit:
        return x
    e = abs(x.numerator).bit_length() - x.denominator.bit_length()
    k = bits - e
    return Fraction(rnd(x * (1 << k)), 1 << k) if k >= 0 else Fraction(rnd(x / (1 << -k)) << -k)


def _coerce(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval.point(as_rational(x))


def cmp_certified(a, b) -> Order:
    """LESS iff a.hi < b.lo, GREATER iff a.lo > b.hi, OVERLAP otherwise."""
    a, b = _coerce(a), _coerce(b)
    if a.hi < b.lo:
        return Order.LESS
    if a.lo > b.hi:
        return Order.GREATER
    return Order.OVERLAP


def interval_sum(items: Iterable[Interval]) -> Interval:
    lo = hi = Fraction(0)
    for it in items:
        lo += it.lo
        hi += it.hi
    return Interval(lo, hi)


# ---------------------------------------------------------------------------
# certified elementary functions (fixed-point integer arithmetic)

def _iroot(n: int, k: int) -> int:
    """floor(n ** (1/k)) for n >= 0."""
    if n < 0:
        raise ValueError("negative radicand")
    if n < 2 or k == 1:
        return n
    if k == 2:
        return math.isqrt(n)
    x = 1 << ((n.bit_length() + k - 1) // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    while x ** k > n:
        x -= 1
    while (x + 1) ** k <= n:
        x += 1
    return x


def root_interval(q: Number, k: int, bits: int = 64) -> Interval:
    """Certified enclosure of q**(1/k) for rational q >= 0, width <= 2**-bits * scale."""
    q = as_rational(q)
    if q < 0:
        raise ValueError("negative radicand")
    if k < 1:
        raise ValueError("root order must be >= 1")
    if k == 1 or q == 0:
        return Interval.point(q)
    # floor((p/d * 2**(k*bits))**(1/k)) computed via integer root of floor(p*2**(kb)/d)
    num, den = q.numerator, q.denominator
    lo_int = _iroot((num << (k * bits)) // den, k)
    hi_int = _iroot(-((-num << (k * bits)) // den), k)
    if hi_int ** k < -((-num << (k * bits)) // den):
        hi_int += 1
    s = 1 << bits
    return Interval(Fraction(lo_int, s), Fraction(hi_int, s))


def sqrt_interval(q: Number, bits: int = 64) -> Interval:
    return root_interval(q, 2, bits)


def rational_power_interval(x: Number, e: Number, bits: int = 64) -> Interval:
    """Certified enclosure of x**e for rational x > 0 and rational exponent e."""
    x, e = as_rational(x), as_rational(e)
    if x <= 0:
        raise ValueError("base must be positive")
    p, k = e.numerator, e.denominator
    base = x ** p  # exact rational
    # guard bits so the relative width is about 2**-bits
    mag = abs(base.numerator.bit_length() - base.denominator.bit_length()) // k + 2
    return root_interval(base, k, bits + mag)


def interval_power(x: Interval, e: Number, bits: int = 64) -> Interval:
    """Enclosure of y**e for all y in a positive interval x (monotone in y)."""
    e = as_rational(e)
    if x.lo <= 0:
        if x.lo == 0 and e > 0:
            return Interval(Fraction(0), rational_power_interval(x.hi, e, bits).hi) if x.hi > 0 else Interval.point(0)
        raise ValueError("interval_power needs a positive base")
    if e.denominator == 1:
        k = e.numerator
        if k >= 0:
            return Interval(x.lo ** k, x.hi ** k)
        return Interval(x.hi ** k, x.lo ** k)
    a = rational_power_interval(x.lo, e, bits)
    b = rational_power_interval(x.hi, e, bits)
    return Interval(min(a.lo, b.lo), max(a.hi, b.hi))


def _atan_inv_fixed(k: int, prec: int) -> tuple[int, int]:
    """atan(1/k) * 2**prec as (value, absolute error bound in ulps)."""
    total = 0
    err = 0
    t = (1 << prec) // k  # floor, err < 1
    k2 = k * k
    i = 0
    sign = 1
    while t:
        total += sign * (t // (2 * i + 1))
        err += i + 2
        t //= k2
        i += 1
        sign = -sign
    # alternating remainder is below the first omitted term, itself < i + 1 ulps
    return total, err + i + 2


def pi_interval(bits: int = 64) -> Interval:
    """Certified enclosure of pi via Machin's formula, width about 2**-bits."""
    prec = bits + 16
    a, ea = _atan_inv_fixed(5, prec)
    b, eb = _atan_inv_fixed(239, prec)
    v = 16 * a - 4 * b
    e = 16 * ea + 4 * eb
    s = 1 << prec
    return Interval(Fraction(v - e, s), Fraction(v + e, s))


def _atanh_fixed(p: int, q: int, prec: int) -> tuple[int, int]:
    """atanh(p/q) * 2**prec with 0 <= p/q <= 1/2, as (value, error bound in ulps)."""
    if p == 0:
        return 0, 0
    total = 0
    err = 0
    t = (p << prec) // q
    pp, qq = p * p, q * q
    i = 0
    while t:
        total += t // (2 * i + 1)
        err += i + 2
        t = t * pp // qq
        i += 1
    # once t hits 0 the true terms are below i + 1 ulps and decay with ratio <= 1/4
    return total, err + 2 * (i + 2)


def log_interval(x: Number, bits: int = 64) -> Interval:
    """Certified enclosure of log(x) for rational x > 0, width about 2**-bits."""
    x = as_rational(x)
    if x <= 0:
        raise ValueError("log of a nonpositive number")
    if x == 1:
        return Interval.point(0)
    # x = 2**k * y with y in [3/4, 3/2)
    k = x.numerator.bit_length() - x.denominator.bit_length()
    y = x / Fraction(2) ** k
    while y >= Fraction(3, 2):
        y /= 2
        k += 1
    while y < Fraction(3, 4):
        y *= 2
        k -= 1
    prec = bits + 16 + abs(k).bit_length()
    # log y = 2 atanh((y-1)/(y+1)), |(y-1)/(y+1)| <= 1/5
    z = (y - 1) / (y + 1)
    sgn = -1 if z < 0 else 1
    zy, ezy = _atanh_fixed(abs(z.numerator), z.denominator, prec)
    l2, el2 = _atanh_fixed(1, 3, prec)
    v = 2 * sgn * zy + 2 * k * l2
    e = 2 * ezy + 2 * abs(k) * el2 + 1
    s = 1 << prec
    return Interval(Fraction(v - e, s), Fraction(v + e, s))


def log_interval_of(x: Interval, bits: int = 64) -> Interval:
    a = log_interval(x.lo, bits)
    b = log_interval(x.hi, bits) if not x.is_point else a
    return Interval(a.lo, b.hi)


# ---------------------------------------------------------------------------
# lazily evaluated reals

class ExactReal:
    """A real number that can be enclosed in intervals of any requested width."""

    def eval(self, width: Number) -> Interval:
        raise NotImplementedError

    def eval_bits(self, bits: int) -> Interval:
        return self.eval(Fraction(1, 1 << bits))

    @property
    def rational_value(self) -> Fraction | None:
        """The exact value when the real is known to be rational, else None."""
        return None

    def to_json(self):
        raise NotImplementedError

    # linear combinations keep things lazy
    def __add__(self, other):
        return LinearCombination.of([(1, self), (1, as_exact(other))])

    __radd__ = __add__

    def __sub__(self, other):
        return LinearCombination.of([(1, self), (-1, as_exact(other))])

    def __rsub__(self, other):
        return LinearCombination.of([(1, as_exact(other)), (-1, self)])

    def __neg__(self):
        return LinearCombination.of([(-1, self)])

    def __mul__(self, k):
        if isinstance(k, ExactReal):
            if k.rational_value is None:
                return NotImplemented
            k = k.rational_value
        return LinearCombination.of([(as_rational(k), self)])

    __rmul__ = __mul__


class Literal(ExactReal):
    __slots__ = ("value",)

    def __init__(self, value: Number):
        self.value = as_rational(value)

    def eval(self, width: Number) -> Interval:
        if as_rational(width) <= 0:
            raise ValueError("width must be positive")
        return Interval.point(self.value)

    @property
    def rational_value(self):
        return self.value

    def to_json(self):
        return rational_str(self.value)

    def __repr__(self):
        return f"Literal({rational_str(self.value)})"

    def __eq__(self, other):
        return isinstance(other, Literal) and other.value == self.value

    def __hash__(self):
        return hash(("lit", self.value))


class SeriesReal(ExactReal):
    """Sum of a rapidly decaying series known through finitely many terms.

    The terms must satisfy |t_{i+1}| <= |t_i| / 2 (checked here for the
    computed ones, guaranteed by the generating recursion for the rest), so
    the remainder after term k is bounded by 2|t_{k+1}|.  With all terms
    positive the remainder lies in [0, 2 t_{k+1}], otherwise in
    [-2|t_{k+1}|, 2|t_{k+1}|].
    """

    def __init__(self, terms: Sequence[Number], source: dict | None = None):
        terms = tuple(as_rational(t) for t in terms)
        if not terms:
            raise ValueError("series needs at least one term")
        if any(t == 0 for t in terms):
            raise ValueError("series terms must be nonzero")
        for a, b in zip(terms, terms[1:]):
            if 2 * abs(b) > abs(a):
                raise ValueError("series terms do not decay by a factor 2")
        self.terms = terms
        self.positive = all(t > 0 for t in terms)
        self.source = dict(source or {})
        self._prefix = [Fraction(0)]
        for t in terms:
            self._prefix.append(self._prefix[-1] + t)

    def enclosure(self, k: int) -> Interval:
        """Interval from the first k terms plus the certified tail bound."""
        if not 0 <= k < len(self.terms):
            raise InsufficientLevels(f"tail after {k} terms needs term {k + 1}, have {len(self.terms)}")
        s, t = self._prefix[k], abs(self.terms[k])
        if self.positive:
            return Interval(s, s + 2 * t)
        return Interval(s - 2 * t, s + 2 * t)

    def eval(self, width: Number) -> Interval:
        w = as_rational(width)
        if w <= 0:
            raise ValueError("width must be positive")
        factor = 2 if self.positive else 4
        for k in range(len(self.terms)):
            if factor * abs(self.terms[k]) <= w:
                return self.enclosure(k)
        raise InsufficientLevels(
            f"series with {len(self.terms)} terms cannot reach width {float(w):.3g}; extend the construction"
        )

    def to_json(self):
        if "state" in self.source:
            return {"state": self.source["state"], "coord": self.source.get("coord")}
        return {"series": [rational_str(t) for t in self.terms]}

    def __repr__(self):
        return f"SeriesReal({len(self.terms)} terms, {self.source or ''})"


class QuadraticReal(ExactReal):
    """(a + b*sqrt(d)) / c with integers a, b, c != 0 and d > 0 not a square."""

    def __init__(self, a: int, b: int, d: int, c: int = 1):
        if c == 0 or d <= 0:
            raise ValueError("need c != 0 and d > 0")
        if math.isqrt(d) ** 2 == d:
            raise ValueError("d must not be a perfect square")
        if c < 0:
            a, b, c = -a, -b, -c
        self.a, self.b, self.d, self.c = int(a), int(b), int(d), int(c)

    def eval(self, width: Number) -> Interval:
        w = as_rational(width)
        if w <= 0:
            raise ValueError("width must be positive")
        scale = Fraction(abs(self.b), self.c)
        if scale == 0:
            return Interval.point(Fraction(self.a, self.c))
        bits = bits_for_width(w / scale)
        r = math.isqrt(self.d << (2 * bits))
        s = Interval(Fraction(r, 1 << bits), Fraction(r + 1, 1 << bits))
        return (s * self.b + self.a) * Fraction(1, self.c)

    def to_json(self):
        return {"quadratic": [self.a, self.b, self.d, self.c]}

    def __repr__(self):
        return f"QuadraticReal(({self.a} + {self.b}*sqrt({self.d}))/{self.c})"


class LinearCombination(ExactReal):
    """Finite rational linear combination of ExactReals."""

    def __init__(self, parts: Sequence[tuple[Fraction, ExactReal]]):
        self.parts = tuple((as_rational(k), x) for k, x in parts if as_rational(k) != 0)

    @classmethod
    def of(cls, parts) -> ExactReal:
        flat: list[tuple[Fraction, ExactReal]] = []
        const = Fraction(0)
        for k, x in parts:
            k = as_rational(k)
            if isinstance(x, LinearCombination):
                flat.extend((k * kk, xx) for kk, xx in x.parts)
            elif x.rational_value is not None:
                const += k * x.rational_value
            else:
                flat.append((k, x))
        if const:
            flat.append((Fraction(1), Literal(const)))
        if not flat:
            return Literal(0)
        if len(flat) == 1 and flat[0][0] == 1:
            return flat[0][1]
        return cls(flat)

    @property
    def rational_value(self):
        if all(x.rational_value is not None for _, x in self.parts):
            return sum((k * x.rational_value for k, x in self.parts), Fraction(0))
        return None

    def eval(self, width: Number) -> Interval:
        w = as_rational(width)
        if w <= 0:
            raise ValueError("width must be positive")
        total = sum(abs(k) for k, _ in self.parts) or Fraction(1)
        each = w / (total * len(self.parts))
        return interval_sum(x.eval(each) * k for k, x in self.parts)

    def to_json(self):
        return {"combination": [[rational_str(k), x.to_json()] for k, x in self.parts]}

    def __repr__(self):
        return "LinearCombination(" + ", ".join(f"{k}*{x!r}" for k, x in self.parts) + ")"


def as_exact(x) -> ExactReal:
    if isinstance(x, ExactReal):
        return x
    return Literal(as_rational(x))


def eval_to(x, width: Number) -> Interval:
    """Evaluate an ExactReal, Interval or rational to an interval."""
    if isinstance(x, Interval):
        return x
    return as_exact(x).eval(width)


def parse_exact(obj, resolver=None) -> ExactReal:
    """Inverse of ``ExactReal.to_json``; ``resolver`` maps state references to reals."""
    if isinstance(obj, (int, str, Fraction)):
        return Literal(as_rational(obj))
    if isinstance(obj, dict):
        if "quadratic" in obj:
            return QuadraticReal(*[int(v) for v in obj["quadratic"]])
        if "series" in obj:
            return SeriesReal([as_rational(t) for t in obj["series"]])
        if "combination" in obj:
            return LinearCombination.of([(as_rational(k), parse_exact(v, resolver)) for k, v in obj["combination"]])
        if "state" in obj:
            if resolver is None:
                raise ValueError("state reference without a resolver")
            return resolver(obj["state"], obj.get("coord"))
    raise ValueError(f"cannot parse real from {obj!r}")
