"""Norm descriptors with certified evaluation and max-norm equivalence constants."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .exactnum import (
    Interval,
    Number,
    as_rational,
    bits_for_width,
    interval_power,
    rational_power_interval,
    rational_str,
)

DEFAULT_WIDTH = Fraction(1, 1 << 64)

KINDS = ("max", "p", "wmax", "custom")


@dataclass(frozen=True)
class NormDescriptor:
    """A norm on R^dimension.

    kind is one of ``max``, ``p`` (with exponent ``p >= 1``), ``wmax`` (with
    positive ``weights``) or ``custom``.  Custom norms are either polyhedral,
    given by linear ``forms`` combined with ``max`` or ``sum`` of absolute
    values, or backed by a Python ``evaluator`` mapping a vector of intervals
    to an interval.  ``equiv_lo`` and ``equiv_hi`` satisfy
    equiv_lo * |x|_inf <= |x| <= equiv_hi * |x|_inf.
    """

    dimension: int
    kind: str
    p: Optional[Fraction] = None
    weights: tuple = ()
    forms: tuple = ()
    combine: str = "max"
    equiv_lo: Fraction = Fraction(1)
    equiv_hi: Fraction = Fraction(1)
    evaluator: Optional[Callable] = field(default=None, compare=False, repr=False)
    float_evaluator: Optional[Callable] = field(default=None, compare=False, repr=False)

    # evaluation -------------------------------------------------------------
    def eval(self, v: Sequence, width: Number = DEFAULT_WIDTH) -> Interval:
        return eval_norm(self, v, width)

    @property
    def is_absolute(self) -> bool:
        """True when the norm depends only on |x_i| and is monotone in each."""
        return self.kind in ("max", "p", "wmax")

    @property
    def is_euclidean(self) -> bool:
        return self.kind == "p" and self.p == 2

    def exact_key(self, v: Sequence[Number]) -> Optional[Fraction]:
        """A rational strictly monotone function of |v|, or None if unavailable."""
        v = [as_rational(x) for x in v]
        if self.kind == "max":
            return max(abs(x) for x in v)
        if self.kind == "wmax":
            return max(w * abs(x) for w, x in zip(self.weights, v))
        if self.kind == "p" and self.p.denominator == 1:
            k = self.p.numerator
            return sum((abs(x) ** k for x in v), Fraction(0))
        if self.kind == "custom" and self.forms:
            return _polyhedral(self.forms, self.combine, v)
        return None

    def key_of_value(self, t: Number) -> Optional[Fraction]:
        """exact_key threshold matching norm value t (so |x| <= t iff key <= this)."""
        t = as_rational(t)
        if self.kind in ("max", "wmax") or (self.kind == "custom" and self.forms):
            return t
        if self.kind == "p" and self.p.denominator == 1:
            return t ** self.p.numerator if t >= 0 else Fraction(-1)
        return None

    def value_of_key(self, key: Fraction, width: Number = DEFAULT_WIDTH) -> Interval:
        if self.kind in ("max", "wmax") or (self.kind == "custom" and self.forms):
            return Interval.point(key)
        if self.kind == "p" and self.p.denominator == 1:
            if key == 0:
                return Interval.point(0)
            return rational_power_interval(key, Fraction(1, self.p.numerator), bits_for_width(width) + 4)
        raise ValueError("norm has no exact key")

    def np_eval(self, x: np.ndarray) -> np.ndarray:
        """Floating-point evaluation on the rows of a (k, dimension) array."""
        if self.kind == "custom":
            return self.np_eval_signed(x)
        x = np.abs(np.asarray(x, dtype=np.float64))
        if self.kind == "max":
            return x.max(axis=1)
        if self.kind == "wmax":
            return (x * np.array([float(w) for w in self.weights])).max(axis=1)
        if self.kind == "p":
            p = float(self.p)
            if p == 1.0:
                return x.sum(axis=1)
            if p == 2.0:
                return np.sqrt((x * x).sum(axis=1))
            m = x.max(axis=1)
            safe = np.where(m > 0, m, 1.0)
            return m * ((x / safe[:, None]) ** p).sum(axis=1) ** (1.0 / p)
        raise ValueError(f"unknown norm kind {self.kind!r}")

    def np_eval_signed(self, x: np.ndarray) -> np.ndarray:
        """Like np_eval but keeps signs (needed by non-absolute custom norms)."""
        if self.kind == "custom" and self.forms:
            f = np.abs(x_signed_forms(self.forms, np.asarray(x, dtype=np.float64)))
            return f.max(axis=1) if self.combine == "max" else f.sum(axis=1)
        if self.kind == "custom":
            if self.float_evaluator is None:
                raise ValueError("custom norm without a float evaluator")
            return np.asarray(self.float_evaluator(np.asarray(x, dtype=np.float64)), dtype=np.float64)
        return self.np_eval(x)

    def to_json(self) -> dict:
        d: dict = {"kind": self.kind, "dimension": self.dimension}
        if self.kind == "p":
            d["p"] = rational_str(self.p)
        if self.kind == "wmax":
            d["weights"] = [rational_str(w) for w in self.weights]
        if self.kind == "custom":
            if not self.forms:
                raise ValueError("evaluator-backed custom norms are not serializable")
            d["forms"] = [[rational_str(c) for c in f] for f in self.forms]
            d["combine"] = self.combine
        d["equiv"] = [rational_str(self.equiv_lo), rational_str(self.equiv_hi)]
        return d

    def __str__(self) -> str:
        if self.kind == "max":
            return f"max(R^{self.dimension})"
        if self.kind == "p":
            return f"p={rational_str(self.p)}(R^{self.dimension})"
        if self.kind == "wmax":
            return f"wmax{tuple(rational_str(w) for w in self.weights)}"
        return f"custom(R^{self.dimension})"


def x_signed_forms(forms, x: np.ndarray) -> np.ndarray:
    mat = np.array([[float(c) for c in f] for f in forms])
    return x @ mat.T


def _polyhedral(forms, combine: str, v: Sequence[Fraction]) -> Fraction:
    vals = [abs(sum((c * x for c, x in zip(f, v)), Fraction(0))) for f in forms]
    return max(vals) if combine == "max" else sum(vals, Fraction(0))


# constructors ---------------------------------------------------------------

def max_norm(dim: int) -> NormDescriptor:
    _check_dim(dim)
    return NormDescriptor(dim, "max")


def p_norm(dim: int, p: Number) -> NormDescriptor:
    _check_dim(dim)
    p = as_rational(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    hi = rational_power_interval(dim, 1 / p, 40).hi if dim > 1 else Fraction(1)
    return NormDescriptor(dim, "p", p=p, equiv_lo=Fraction(1), equiv_hi=hi)


def weighted_max_norm(weights: Sequence[Number]) -> NormDescriptor:
    w = tuple(as_rational(x) for x in weights)
    if not w or any(x <= 0 for x in w):
        raise ValueError("weights must be positive")
    return NormDescriptor(len(w), "wmax", weights=w, equiv_lo=min(w), equiv_hi=max(w))


def custom_norm(
    dim: int,
    equiv: tuple[Number, Number],
    forms: Sequence[Sequence[Number]] = (),
    combine: str = "max",
    evaluator: Optional[Callable] = None,
    float_evaluator: Optional[Callable] = None,
    samples: int = 64,
    seed: int = 0,
) -> NormDescriptor:
    """Build and validate a custom norm with declared equivalence constants."""
    _check_dim(dim)
    lo, hi = as_rational(equiv[0]), as_rational(equiv[1])
    if not 0 < lo <= hi:
        raise ValueError("need 0 < equiv_lo <= equiv_hi")
    if combine not in ("max", "sum"):
        raise ValueError("combine must be 'max' or 'sum'")
    f = tuple(tuple(as_rational(c) for c in row) for row in forms)
    if f and any(len(row) != dim for row in f):
        raise ValueError("form length does not match dimension")
    if not f and evaluator is None:
        raise ValueError("custom norm needs forms or an evaluator")
    if f and np.linalg.matrix_rank(np.array([[float(c) for c in row] for row in f])) < dim:
        raise ValueError("forms do not span: not positive definite")
    norm = NormDescriptor(
        dim, "custom", forms=f, combine=combine, equiv_lo=lo, equiv_hi=hi,
        evaluator=evaluator, float_evaluator=float_evaluator,
    )
    validate_equivalence(norm, samples=samples, seed=seed)
    return norm


def _check_dim(dim: int) -> None:
    if not isinstance(dim, int) or dim < 1:
        raise ValueError("dimension must be a positive integer")


def norm_from_json(d: dict, dim: Optional[int] = None) -> NormDescriptor:
    kind = d.get("kind", "max")
    dim = int(d.get("dimension", dim or 0)) or dim
    if kind == "max":
        return max_norm(dim)
    if kind == "p":
        return p_norm(dim, as_rational(d["p"]))
    if kind == "wmax":
        return weighted_max_norm([as_rational(w) for w in d["weights"]])
    if kind == "custom":
        lo, hi = d["equiv"]
        return custom_norm(dim, (as_rational(lo), as_rational(hi)), forms=d["forms"], combine=d.get("combine", "max"))
    raise ValueError(f"unknown norm kind {kind!r}")


# evaluation -----------------------------------------------------------------

def _as_interval(x) -> Interval:
    return x if isinstance(x, Interval) else Interval.point(as_rational(x))


def eval_norm(norm: NormDescriptor, v: Sequence, width: Number = DEFAULT_WIDTH) -> Interval:
    """Certified interval for |v|; exact when v is rational and the norm allows it."""
    if len(v) != norm.dimension:
        raise ValueError(f"dimension mismatch: norm on R^{norm.dimension}, vector of length {len(v)}")
    iv = [_as_interval(x) for x in v]
    bits = bits_for_width(as_rational(width)) + 8
    if norm.kind == "max":
        a = [abs(x) for x in iv]
        return Interval(max(x.lo for x in a), max(x.hi for x in a))
    if norm.kind == "wmax":
        a = [abs(x) * w for x, w in zip(iv, norm.weights)]
        return Interval(max(x.lo for x in a), max(x.hi for x in a))
    if norm.kind == "p":
        p = norm.p
        if p == 1:
            a = [abs(x) for x in iv]
            return Interval(sum(x.lo for x in a), sum(x.hi for x in a))
        a = [abs(x) for x in iv]
        if p.denominator == 1:
            s = Interval(sum(x.lo ** p.numerator for x in a), sum(x.hi ** p.numerator for x in a))
        else:
            parts = [interval_power(x, p, bits) if x.hi > 0 else Interval.point(0) for x in a]
            s = Interval(sum(x.lo for x in parts), sum(x.hi for x in parts))
        if s.hi == 0:
            return Interval.point(0)
        return interval_power(s, 1 / p, bits)
    if norm.forms:
        vals = []
        for f in norm.forms:
            acc = Interval.point(0)
            for c, x in zip(f, iv):
                acc = acc + x * c
            vals.append(abs(acc))
        if norm.combine == "max":
            return Interval(max(x.lo for x in vals), max(x.hi for x in vals))
        return Interval(sum(x.lo for x in vals), sum(x.hi for x in vals))
    out = norm.evaluator(iv, as_rational(width))
    return _as_interval(out)


def validate_equivalence(norm: NormDescriptor, samples: int = 64, seed: int = 0) -> None:
    """Check the declared constants on base vectors, +-1 vertices and random samples."""
    for x in _test_vectors(norm.dimension, samples, seed):
        inf = max(abs(c) for c in x)
        lo, hi = norm.equiv_lo * inf, norm.equiv_hi * inf
        for width in (DEFAULT_WIDTH, Fraction(1, 1 << 200)):
            val = eval_norm(norm, x, width)
            if val.hi < lo or val.lo > hi:
                raise ValueError(f"declared equivalence constants violated at {[rational_str(c) for c in x]}")
            if lo <= val.lo and val.hi <= hi:
                break
        else:
            raise ValueError(f"declared equivalence constants not certified at {[rational_str(c) for c in x]}")


def _test_vectors(dim: int, samples: int, seed: int):
    for i in range(dim):
        yield [Fraction(int(i == j)) for j in range(dim)]
    if dim <= 12:
        for signs in itertools.product((1, -1), repeat=dim):
            yield [Fraction(s) for s in signs]
    rng = np.random.Generator(np.random.Philox(seed))
    for _ in range(samples):
        num = rng.integers(-1000, 1001, size=dim)
        if not num.any():
            continue
        yield [Fraction(int(a), 1000) for a in num]


def project_norm(norm: NormDescriptor, coords: Sequence[int]) -> NormDescriptor:
    """The norm x' -> |pad(x')| on the coordinates ``coords`` (0-based)."""
    coords = list(coords)
    if not coords or len(set(coords)) != len(coords) or min(coords) < 0 or max(coords) >= norm.dimension:
        raise ValueError("coords must be a nonempty set of valid indices")
    k = len(coords)
    if norm.kind == "max":
        return max_norm(k)
    if norm.kind == "p":
        return p_norm(k, norm.p)
    if norm.kind == "wmax":
        return weighted_max_norm([norm.weights[i] for i in coords])
    base = norm

    def pad(x):
        full = [Interval.point(0)] * base.dimension
        for i, c in zip(coords, x):
            full[i] = c
        return full

    forms = tuple(tuple(f[i] for i in coords) for f in base.forms) if base.forms else ()
    evaluator = None
    float_evaluator = None
    if not forms:
        evaluator = lambda x, w: eval_norm(base, pad(x), w)  # noqa: E731
        if base.float_evaluator is not None:
            def float_evaluator(arr):
                full = np.zeros((arr.shape[0], base.dimension))
                full[:, coords] = arr
                return base.float_evaluator(full)
    # upper constant: convexity puts the max over the cube at a vertex
    hi = max(eval_norm(base, pad([Interval.point(s) for s in signs])).hi
             for signs in itertools.product((1, -1), repeat=k)) if k <= 12 else base.equiv_hi
    if k == 1:
        lo = eval_norm(base, pad([Interval.point(1)])).lo
    else:
        lo = base.equiv_lo
    hi = min(hi, base.equiv_hi)
    return NormDescriptor(k, "custom", forms=forms, combine=base.combine, equiv_lo=lo, equiv_hi=hi,
                          evaluator=evaluator, float_evaluator=float_evaluator)


@dataclass(frozen=True)
class ExpandingResult:
    certified_on_samples: bool
    counterexample: Optional[tuple] = None
    proved: bool = False
    label: str = "sample-based check, not a proof"


def is_expanding(norm: NormDescriptor, samples: int = 64, seed: int = 0) -> ExpandingResult:
    """Check |x| >= |pi_j(x)| for every coordinate projection pi_j on test vectors."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    for x in _test_vectors(norm.dimension, samples, seed):
        val = eval_norm(norm, x)
        for j in range(norm.dimension):
            if x[j] == 0:
                continue
            proj = [x[i] if i == j else Fraction(0) for i in range(norm.dimension)]
            pv = eval_norm(norm, proj)
            if val.hi < pv.lo:
                return ExpandingResult(False, tuple(x))
    if norm.kind in ("max", "p", "wmax"):
        return ExpandingResult(True, None, True, "absolute monotone norm: expanding for every x")
    return ExpandingResult(True)


@dataclass(frozen=True)
class NormConstants:
    d1: Interval
    d2: Interval
    gamma_allones: Interval
    gamma_e1_projected: Interval


def norm_constants(norm: NormDescriptor, sign_patterns: Optional[Sequence[Sequence[int]]] = None,
                   width: Number = DEFAULT_WIDTH) -> NormConstants:
    """d1 = |e1|, d2 = |e2|, Gamma = |(1,...,1)| (or max over sign patterns), gamma = |e1|'."""
    dim = norm.dimension
    e = lambda i: [Fraction(int(i == j)) for j in range(dim)]  # noqa: E731
    d1 = eval_norm(norm, e(0), width)
    d2 = eval_norm(norm, e(1), width) if dim > 1 else d1
    pats = list(sign_patterns) if sign_patterns else [[1] * dim]
    vals = [eval_norm(norm, [Fraction(s) for s in pat], width) for pat in pats]
    gamma = Interval(max(v.lo for v in vals), max(v.hi for v in vals))
    g1 = eval_norm(project_norm(norm, [0]), [Fraction(1)], width)
    return NormConstants(d1, d2, gamma, g1)
