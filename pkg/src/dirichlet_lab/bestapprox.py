"""Certified best approximations of linear forms by exhaustive enumeration.

The approximation function of an m x n real matrix Omega is

    psi(t) = min { |Omega b_hat + b_tilde|_2 : b_hat != 0, |b_hat|_1 <= t }

over integer b_hat in Z^n and b_tilde in Z^m.  Enumeration runs over shells
|b_hat|_inf = s.  Each shell is screened in floating point (exact 64-bit
integer arithmetic for small rationals, 64-bit fixed point modulo 1 for
everything else) with a rigorous error bound, and every point that could
matter is then certified with exact rationals or refined intervals.

Integer vectors are reported with the first nonzero entry of b_hat positive;
ties in quality are broken lexicographically on (b_hat, b_tilde).
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .exactnum import (
    ExactReal,
    InsufficientLevels,
    Interval,
    Literal,
    Number,
    Order,
    as_exact,
    as_rational,
    bits_for_width,
    cmp_certified,
    rational_str,
)
from .normspace import NormDescriptor, max_norm

DEFAULT_BUDGET = 10 ** 8
MAX_BITS = 1 << 16
_TWO64 = float(2 ** 64)


class BudgetExceeded(RuntimeError):
    """The enumeration volume passes the configured cap."""


class CertificationError(ArithmeticError):
    """Two quantities could not be separated at the maximal refinement."""


class EmptyHeightRange(ValueError):
    """No nonzero integer vector has height <= t."""


def default_budget() -> int:
    env = os.environ.get("DIRLAB_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


@dataclass(frozen=True)
class ApproxProblem:
    """Omega (m rows of n ExactReals) with a norm on R^n and a norm on R^m."""

    omega: tuple
    norm1: NormDescriptor
    norm2: NormDescriptor

    def __post_init__(self):
        rows = tuple(tuple(as_exact(x) for x in row) for row in self.omega)
        if not rows or not rows[0]:
            raise ValueError("empty matrix")
        if any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("ragged matrix")
        object.__setattr__(self, "omega", rows)
        if self.norm1.dimension != self.n or self.norm2.dimension != self.m:
            raise ValueError(
                f"norm dimensions ({self.norm1.dimension}, {self.norm2.dimension}) do not match "
                f"matrix shape {self.m}x{self.n}"
            )

    @property
    def m(self) -> int:
        return len(self.omega)

    @property
    def n(self) -> int:
        return len(self.omega[0])

    @classmethod
    def of(cls, rows, norm1: Optional[NormDescriptor] = None, norm2: Optional[NormDescriptor] = None):
        rows = [[as_exact(x) for x in r] for r in rows]
        m, n = len(rows), len(rows[0])
        return cls(tuple(map(tuple, rows)), norm1 or max_norm(n), norm2 or max_norm(m))

    def rational_matrix(self) -> Optional[list]:
        vals = [[x.rational_value for x in r] for r in self.omega]
        if any(v is None for r in vals for v in r):
            return None
        return vals

    def transpose(self, norm1: Optional[NormDescriptor] = None, norm2: Optional[NormDescriptor] = None):
        rows = [[self.omega[j][i] for j in range(self.m)] for i in range(self.n)]
        return ApproxProblem.of(rows, norm1, norm2)


@dataclass(frozen=True)
class ApproxRecord:
    index: int
    b_hat: tuple
    b_tilde: tuple
    height: Interval
    quality: Interval

    @property
    def b(self) -> tuple:
        return tuple(self.b_hat) + tuple(self.b_tilde)

    def to_json(self) -> dict:
        return {
            "v": self.index,
            "b_hat": list(self.b_hat),
            "b_tilde": list(self.b_tilde),
            "height": self.height.to_json(),
            "quality": self.quality.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "ApproxRecord":
        return cls(int(d["v"]), tuple(d["b_hat"]), tuple(d["b_tilde"]),
                   Interval.from_json(d["height"]), Interval.from_json(d["quality"]))


# ---------------------------------------------------------------------------
# lattice shells

def canonical_shell(n: int, s: int) -> np.ndarray:
    """All b in Z^n with |b|_inf = s whose first nonzero entry is positive."""
    if s == 0:
        return np.zeros((0, n), dtype=np.int64)
    full = np.arange(-s, s + 1, dtype=np.int64)
    parts = []
    # split on the position k of the first nonzero coordinate (value in 1..s)
    for k in range(n):
        tail = n - k - 1
        zeros = np.zeros((1, k), dtype=np.int64)
        # leading value s, tail free
        parts.append(_product([zeros, np.array([[s]]), _grid([full] * tail)]))
        # leading value below s, tail reaches s
        if tail and s > 1:
            lead = np.arange(1, s, dtype=np.int64)[:, None]
            parts.append(_product([zeros, lead, _sphere(tail, s)]))
    return np.concatenate(parts, axis=0)


def _grid(grids: Sequence[np.ndarray]) -> np.ndarray:
    if not grids:
        return np.zeros((1, 0), dtype=np.int64)
    mesh = np.meshgrid(*grids, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def _product(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Cartesian product of row sets, first block varying slowest."""
    out = blocks[0]
    for blk in blocks[1:]:
        out = np.concatenate([np.repeat(out, blk.shape[0], axis=0), np.tile(blk, (out.shape[0], 1))], axis=1)
    return out


def _sphere(t: int, s: int) -> np.ndarray:
    """All vectors of Z^t with max norm exactly s."""
    full = np.arange(-s, s + 1, dtype=np.int64)
    inner = np.arange(-s + 1, s, dtype=np.int64)
    ends = np.array([[-s], [s]], dtype=np.int64)
    parts = []
    for p in range(t):
        parts.append(_product([_grid([inner] * p), ends, _grid([full] * (t - p - 1))]))
    return np.concatenate(parts, axis=0)


def shell_size(n: int, s: int) -> int:
    if s == 0:
        return 0
    return ((2 * s + 1) ** n - (2 * s - 1) ** n) // 2


def box_count(n: int, R: int) -> int:
    return ((2 * R + 1) ** n - 1) // 2


def canonical_sign(v: Sequence[int]) -> tuple:
    v = tuple(int(x) for x in v)
    for x in v:
        if x:
            return v if x > 0 else tuple(-y for y in v)
    return v


# ---------------------------------------------------------------------------
# screening engine

class _Engine:
    def __init__(self, problem: ApproxProblem, norm2: Optional[NormDescriptor] = None):
        self.problem = problem
        self.m, self.n = problem.m, problem.n
        self.norm2 = norm2 or problem.norm2
        self.rat = problem.rational_matrix()
        self._cache: dict = {}
        self._int_path = False
        if self.rat is not None:
            D = [math.lcm(*[q.denominator for q in row]) for row in self.rat]
            N = [[int(q * d) for q in row] for row, d in zip(self.rat, D)]
            big = max(max(abs(x) for x in row) for row in N) + max(D)
            if big < 2 ** 40:
                self._int_path = True
                self.D = np.array(D, dtype=np.int64)
                self.N = np.array(N, dtype=np.int64)
                self._big = big
                self._setup_int_keys(D)
        if not self._int_path:
            ivs = [[self.entry(j, i, 70) for i in range(self.n)] for j in range(self.m)]
            I = [[math.floor(iv.lo) for iv in row] for row in ivs]
            P = []
            for row, irow in zip(ivs, I):
                prow = []
                for iv, ip in zip(row, irow):
                    f = (iv.lo - ip) * (1 << 64)
                    prow.append(int(math.floor(f)) % (1 << 64))
                P.append(prow)
            self.I = np.array(I, dtype=np.int64)
            self.P = np.array(P, dtype=np.uint64)
            self.F = np.array([[float(iv.lo - ip) for iv, ip in zip(row, irow)] for row, irow in zip(ivs, I)])
            self._ent_err = 2.0 ** -63
        # custom (non-absolute) output norms need a fattened rounding box
        if self.norm2.is_absolute:
            self.offsets = np.zeros((1, self.m), dtype=np.int64)
        else:
            rad = int(math.ceil(self.norm2.equiv_hi / (2 * self.norm2.equiv_lo)))
            rng = range(-rad, rad + 1)
            self.offsets = np.array(sorted(itertools.product(rng, repeat=self.m)), dtype=np.int64)

    def _setup_int_keys(self, D) -> None:
        """Exact integer quality keys for rational Omega under max, weighted max or l1/l2."""
        self.key_scale = None
        nrm = self.norm2
        L = math.lcm(*D)
        if nrm.kind == "max":
            w = [Fraction(1)] * self.m
        elif nrm.kind == "wmax":
            w = list(nrm.weights)
        elif nrm.kind == "p" and nrm.p in (1, 2):
            w = [Fraction(1)] * self.m
        else:
            return
        W = math.lcm(*[x.denominator for x in w])
        scale = [int(L // d * x * W) for d, x in zip(D, w)]
        top = max(scale) * max(D)  # bound on |rc| * scale
        p = 1 if nrm.kind != "p" else int(nrm.p)
        if (top ** p) * self.m < 2 ** 62:
            self.key_scale = np.array(scale, dtype=np.int64)
            self.key_p = p
            self.key_sum = nrm.kind == "p"

    def screen_exact(self, B: np.ndarray):
        """(b_tilde, integer key) with key strictly monotone in the exact quality, or None."""
        if not self._int_path or getattr(self, "key_scale", None) is None:
            return None
        if B.shape[0] and int(np.abs(B).max()) * self._big * self.n >= 2 ** 62:
            return None
        s = B @ self.N.T
        h = self.D // 2
        rc = np.mod(s + h, self.D) - h
        base = (s - rc) // self.D
        a = np.abs(rc) * self.key_scale
        if self.key_sum:
            key = (a ** self.key_p).sum(axis=1)
        else:
            key = a.max(axis=1)
        return -base, key

    # exact entries -------------------------------------------------------
    def entry(self, j: int, i: int, bits: int) -> Interval:
        key = (j, i, bits)
        iv = self._cache.get(key)
        if iv is None:
            iv = self.problem.omega[j][i].eval_bits(bits)
            self._cache[key] = iv
        return iv

    def row_values(self, bhat: Sequence[int], bits: int) -> list:
        """Intervals for (Omega b_hat)_j with entries evaluated to 2**-bits."""
        out = []
        for j in range(self.m):
            if self.rat is not None:
                out.append(Interval.point(sum((q * b for q, b in zip(self.rat[j], bhat)), Fraction(0))))
                continue
            acc_lo = acc_hi = Fraction(0)
            for i, b in enumerate(bhat):
                if b == 0:
                    continue
                iv = self.entry(j, i, bits)
                if b > 0:
                    acc_lo += b * iv.lo
                    acc_hi += b * iv.hi
                else:
                    acc_lo += b * iv.hi
                    acc_hi += b * iv.lo
            out.append(Interval(acc_lo, acc_hi))
        return out

    # screening --------------------------------------------------------------
    def screen(self, B: np.ndarray):
        """Approximate best b_tilde and quality for each row of B.

        Returns (b_tilde int64 (k, m), q float64 (k,), err float64 (k,)) with
        |q - true quality of (b_hat, b_tilde)| <= err and true min over
        b_tilde >= q - err.
        """
        k = B.shape[0]
        if k == 0:
            return np.zeros((0, self.m), dtype=np.int64), np.zeros(0), np.zeros(0)
        if self._int_path:
            if int(np.abs(B).max()) * self._big * self.n >= 2 ** 62:
                raise BudgetExceeded("integer screening would overflow; height too large")
            s = B @ self.N.T
            h = self.D // 2
            rc = np.mod(s + h, self.D) - h
            base = (s - rc) // self.D
            res = rc / self.D
            err_coord = np.full(k, 2.0 ** -52)
        else:
            Bu = B.astype(np.uint64)
            su = Bu @ self.P.T
            signed = su.view(np.int64)
            res = signed.astype(np.float64) / _TWO64
            carry = np.rint(B.astype(np.float64) @ self.F.T - res).astype(np.int64)
            base = B @ self.I.T + carry
            err_coord = np.abs(B).sum(axis=1) * self._ent_err + 2.0 ** -52
        if self.offsets.shape[0] == 1:
            q = self.norm2.np_eval(res)
            bt = -base
        else:
            best_q = None
            bt = None
            for off in self.offsets:
                qo = self.norm2.np_eval_signed(res - off)
                if best_q is None:
                    best_q, bt = qo, -(base + off)
                else:
                    better = qo < best_q
                    best_q = np.where(better, qo, best_q)
                    bt = np.where(better[:, None], -(base + off), bt)
            q = best_q
        lip = float(self.norm2.equiv_hi) * 1.0001
        err = lip * err_coord + 1e-14 * q + 1e-300
        return bt, q, err

    # certification ------------------------------------------------------------
    def certify(self, bhat: Sequence[int]) -> "_Cert":
        return _Cert(self, tuple(int(x) for x in bhat))


class _Cert:
    """Exact quality of the best b_tilde for one b_hat, refinable on demand."""

    def __init__(self, eng: _Engine, bhat: tuple):
        self.eng = eng
        self.bhat = bhat
        self.bits = 0
        self.btilde: Optional[tuple] = None
        self.key: Optional[Fraction] = None
        self.q: Optional[Interval] = None
        self.exact = eng.rat is not None
        self.refine(80)

    def refine(self, bits: int) -> None:
        eng = self.eng
        if self.exact and self.q is not None and self.q.is_point:
            return
        bits = max(bits, self.bits + 1)
        l1 = sum(abs(b) for b in self.bhat) or 1
        ebits = bits + l1.bit_length() + 8
        try:
            vals = eng.row_values(self.bhat, ebits)
        except InsufficientLevels as exc:
            raise CertificationError(str(exc)) from exc
        norm2 = eng.norm2
        width = Fraction(1, 1 << bits)
        choices = []
        if norm2.is_absolute:
            per_row = []
            for x in vals:
                # nearest integers; both sides kept when the half-integer is not excluded
                lo_r = _round_half_up(x.lo)
                hi_r = _round_half_up(x.hi)
                per_row.append(sorted({lo_r, hi_r} | set(range(lo_r, hi_r + 1))))
            candidates = itertools.product(*per_row)
        else:
            centre = [_round_half_up(x.mid) for x in vals]
            candidates = [tuple(c + o for c, o in zip(centre, off)) for off in eng.offsets.tolist()]
        for r in candidates:
            resid = [x - ri for x, ri in zip(vals, r)]
            bt = tuple(-ri for ri in r)
            if self.exact:
                key = norm2.exact_key([x.lo for x in resid])
                q = norm2.eval([x.lo for x in resid], width)
            else:
                key = None
                q = norm2.eval(resid, width)
            choices.append((bt, key, q))
        if self.exact and all(c[1] is not None for c in choices):
            best = min(choices, key=lambda c: (c[1], c[0]))
            self.btilde, self.key, self.q = best
        else:
            best = _min_interval(choices)
            self.btilde, self.key, self.q = best
        self.bits = bits

    @property
    def sort_key(self) -> tuple:
        return self.bhat + tuple(self.btilde)


def _round_half_up(x: Fraction) -> int:
    """Nearest integer with halves rounded up, so residuals lie in [-1/2, 1/2)."""
    return math.floor(x + Fraction(1, 2))


def _min_interval(choices):
    """Enclosure of the minimum over b_tilde choices, reporting the choice with smallest upper end."""
    best = min(choices, key=lambda c: (c[2].hi, c[0]))
    lo = min(c[2].lo for c in choices)
    return best[0], best[1], Interval(lo, best[2].hi)


def _compare(a: _Cert, b: _Cert) -> int:
    """-1 if quality(a) < quality(b), 1 if greater, 0 if exactly equal (rational only)."""
    if a.key is not None and b.key is not None:
        return (a.key > b.key) - (a.key < b.key)
    bits = 80
    while True:
        o = cmp_certified(a.q, b.q)
        if o == Order.LESS:
            return -1
        if o == Order.GREATER:
            return 1
        if a.exact and b.exact and a.q.is_point and b.q.is_point:
            return 0
        if bits > MAX_BITS:
            raise CertificationError(
                f"cannot separate qualities of {a.bhat} and {b.bhat} at 2^-{MAX_BITS}"
            )
        bits *= 2
        # escalate from low precision so one deep comparison does not force
        # every later candidate to the same (possibly unavailable) precision
        if a.bits < bits:
            a.refine(bits)
        if b.bits < bits:
            b.refine(bits)


def _argmin(certs: list) -> _Cert:
    best = None
    for c in sorted(certs, key=lambda c: c.bhat):
        if best is None:
            best = c
            continue
        r = _compare(c, best)
        if r < 0 or (r == 0 and c.sort_key < best.sort_key):
            best = c
    return best


def _refine_to_width(c: _Cert, width: Fraction) -> Interval:
    bits = max(c.bits, bits_for_width(width) + 2)
    while c.q.width > width:
        if bits > MAX_BITS:
            raise CertificationError("quality interval does not shrink to the requested width")
        c.refine(bits)
        bits *= 2
    return c.q


# ---------------------------------------------------------------------------
# heights

class _Heights:
    """Screening and exact evaluation of |b_hat|_1."""

    def __init__(self, norm1: NormDescriptor):
        self.norm = norm1
        self.is_max = norm1.kind == "max"

    def screen(self, B: np.ndarray):
        h = self.norm.np_eval(B.astype(np.float64))
        return h, 1e-12 * h + 1e-300

    def exact(self, bhat: Sequence[int], width: Fraction = Fraction(1, 1 << 64)) -> Interval:
        if self.is_max:
            return Interval.point(max(abs(int(b)) for b in bhat))
        return self.norm.eval([Fraction(int(b)) for b in bhat], width)

    def compare(self, a: Sequence[int], b: Sequence[int]) -> int:
        ka, kb = self.norm.exact_key(a), self.norm.exact_key(b)
        if ka is not None and kb is not None:
            return (ka > kb) - (ka < kb)
        bits = 64
        while bits <= MAX_BITS:
            o = cmp_certified(self.exact(a, Fraction(1, 1 << bits)), self.exact(b, Fraction(1, 1 << bits)))
            if o == Order.LESS:
                return -1
            if o == Order.GREATER:
                return 1
            if sorted(abs(x) for x in a) == sorted(abs(x) for x in b) and self.norm.kind == "p":
                return 0
            bits *= 4
        raise CertificationError(f"cannot order heights of {tuple(a)} and {tuple(b)}")

    def at_most(self, bhat: Sequence[int], t: Fraction) -> bool:
        key = self.norm.exact_key(bhat)
        tk = self.norm.key_of_value(t)
        if key is not None and tk is not None:
            return key <= tk
        bits = 64
        while bits <= MAX_BITS:
            h = self.exact(bhat, Fraction(1, 1 << bits))
            if h.hi <= t:
                return True
            if h.lo > t:
                return False
            bits *= 4
        raise CertificationError(f"cannot decide whether |{tuple(bhat)}| <= {t}")


def _radius(norm1: NormDescriptor, cap: Fraction) -> int:
    return int(math.floor(cap / norm1.equiv_lo))


def _check_budget(n: int, R: int, offsets: int, budget: Optional[int]) -> None:
    budget = default_budget() if budget is None else budget
    vol = box_count(n, R) * offsets
    if vol > budget:
        raise BudgetExceeded(
            f"enumeration of {vol} candidate points exceeds the budget {budget}; use the structural tier"
        )


# ---------------------------------------------------------------------------
# public operations

def psi(problem: ApproxProblem, t: Number, width: Number = Fraction(1, 10 ** 12),
        budget: Optional[int] = None) -> Interval:
    """Certified enclosure, of width <= ``width``, of psi_Omega(t)."""
    return psi_with_witness(problem, t, width, budget)[0]


def psi_with_witness(problem: ApproxProblem, t: Number, width: Number = Fraction(1, 10 ** 12),
                     budget: Optional[int] = None):
    """psi(t) together with a minimizing (b_hat, b_tilde) (the minimizer may be ambiguous
    for irrational ties, in which case the first certified-minimal candidate is returned)."""
    t, width = as_rational(t), as_rational(width)
    if width <= 0:
        raise ValueError("width must be positive")
    eng = _Engine(problem)
    hts = _Heights(problem.norm1)
    R = _radius(problem.norm1, t)
    if R < 1:
        raise EmptyHeightRange(f"no nonzero integer vector has height <= {t}")
    _check_budget(problem.n, R, eng.offsets.shape[0], budget)
    best_hi = math.inf
    pool = []  # (q - err, bhat)
    for s in range(1, R + 1):
        B = canonical_shell(problem.n, s)
        if not hts.is_max:
            h, herr = hts.screen(B)
            keep = h - herr <= float(t)
            B = B[keep]
            h, herr = h[keep], herr[keep]
            sure = h + herr <= float(t)
        else:
            if s > t:
                break
            sure = np.ones(B.shape[0], dtype=bool)
        if B.shape[0] == 0:
            continue
        bt, q, err = eng.screen(B)
        if sure.any():
            best_hi = min(best_hi, float((q + err)[sure].min()))
        sel = q - err <= best_hi
        for row, lo in zip(B[sel], (q - err)[sel]):
            pool.append((float(lo), tuple(int(x) for x in row)))
        pool = [p for p in pool if p[0] <= best_hi]
    certs = []
    for lo, bhat in sorted(pool, key=lambda p: (p[0], p[1])):
        if lo > best_hi:
            continue
        if not hts.is_max and not hts.at_most(bhat, t):
            continue
        certs.append(eng.certify(bhat))
    if not certs:
        raise EmptyHeightRange(f"no nonzero integer vector has height <= {t}")
    # the minimum of the qualities lies in [min lo, min hi]; refine until narrow
    bits = max(c.bits for c in certs)
    while True:
        his = min(c.q.hi for c in certs)
        lo = min(c.q.lo for c in certs)
        if his - lo <= width:
            break
        if bits > MAX_BITS:
            raise CertificationError("psi enclosure does not shrink to the requested width")
        bits *= 2
        for c in certs:
            if c.q.lo < his:
                c.refine(bits)
    best = min(certs, key=lambda c: (c.q.hi, c.sort_key))
    return Interval(lo, his), best.bhat, best.btilde


def best_approx_sequence(problem: ApproxProblem, height_cap: Number,
                         budget: Optional[int] = None) -> list:
    """All best approximations with height <= height_cap, in order."""
    cap = as_rational(height_cap)
    if cap < 1:
        raise ValueError("height_cap must be >= 1")
    eng = _Engine(problem)
    hts = _Heights(problem.norm1)
    R = _radius(problem.norm1, cap)
    _check_budget(problem.n, R, eng.offsets.shape[0], budget)
    if hts.is_max:
        return _sequence_max_height(problem, eng, hts, R)
    return _sequence_general(problem, eng, hts, cap, R)


def _sequence_max_height(problem, eng, hts, R) -> list:
    records: list = []
    current: Optional[_Cert] = None
    cur_hi = math.inf
    cur_key = None
    for s in range(1, R + 1):
        B = canonical_shell(problem.n, s)
        ex = eng.screen_exact(B)
        if ex is not None:
            # exact integer keys: lexicographic argmin in one pass
            bt, key = ex
            kmin = key.min()
            if cur_key is not None and kmin >= cur_key:
                continue
            ties = np.nonzero(key == kmin)[0]
            i = int(min(ties, key=lambda j: tuple(B[j].tolist())))
            cur_key = int(kmin)
            best = eng.certify(B[i])
            assert best.btilde == tuple(int(x) for x in bt[i])
            current = best
            records.append(_make_record(len(records) + 1, best, hts))
            if cur_key == 0:
                break
            continue
        bt, q, err = eng.screen(B)
        lo = q - err
        thr = min(float((q + err).min()), cur_hi)
        sel = np.nonzero(lo <= thr)[0]
        if sel.size == 0:
            continue
        certs = [eng.certify(B[i]) for i in sel]
        best = _argmin(certs)
        if current is not None and _compare(best, current) >= 0:
            continue
        current = best
        cur_hi = float(best.q.hi) * (1 + 1e-12) + 1e-300
        records.append(_make_record(len(records) + 1, best, hts))
        if _is_zero(best):
            break
    return records


def _is_zero(c: _Cert) -> bool:
    return c.q.is_point and c.q.lo == 0


def _make_record(v: int, c: _Cert, hts: _Heights) -> ApproxRecord:
    return ApproxRecord(v, c.bhat, tuple(c.btilde), hts.exact(c.bhat), c.q)


def _sequence_general(problem, eng, hts, cap, R) -> list:
    """Records for a general height norm: screen, prune dominated points, certify."""
    n = problem.n
    aB = np.zeros((0, n), dtype=np.int64)
    ah_lo = ah_hi = aq_lo = aq_hi = np.zeros(0)
    capf = float(cap)
    for s in range(1, R + 1):
        B = canonical_shell(n, s)
        h, herr = hts.screen(B)
        keep = h - herr <= capf
        if not keep.any():
            continue
        B, h, herr = B[keep], h[keep], herr[keep]
        bt, q, err = eng.screen(B)
        aB = np.concatenate([aB, B])
        ah_lo = np.concatenate([ah_lo, h - herr])
        ah_hi = np.concatenate([ah_hi, h + herr])
        aq_lo = np.concatenate([aq_lo, q - err])
        aq_hi = np.concatenate([aq_hi, q + err])
        alive = _prune(ah_lo, ah_hi, aq_lo, aq_hi)
        aB, ah_lo, ah_hi, aq_lo, aq_hi = aB[alive], ah_lo[alive], ah_hi[alive], aq_lo[alive], aq_hi[alive]
    pts = [tuple(int(x) for x in row) for row in aB]
    pts = [p for p in pts if hts.at_most(p, cap)]
    # exact order by height, grouping equal heights
    import functools
    pts.sort(key=functools.cmp_to_key(lambda a, b: hts.compare(a, b) or ((a > b) - (a < b))))
    groups: list = []
    for p in pts:
        if groups and hts.compare(groups[-1][0], p) == 0:
            groups[-1].append(p)
        else:
            groups.append([p])
    records: list = []
    current = None
    for g in groups:
        best = _argmin([eng.certify(p) for p in g])
        if current is not None and _compare(best, current) >= 0:
            continue
        current = best
        records.append(_make_record(len(records) + 1, best, hts))
        if _is_zero(best):
            break
    return records


def _prune(h_lo, h_hi, q_lo, q_hi) -> np.ndarray:
    """Keep points not dominated by a point of certainly smaller height and no larger quality."""
    order = np.argsort(h_hi, kind="stable")
    pref = np.minimum.accumulate(q_hi[order])
    idx = np.searchsorted(h_hi[order], h_lo, side="left")
    dominated = np.zeros(h_lo.shape[0], dtype=bool)
    has = idx > 0
    dominated[has] = pref[idx[has] - 1] <= q_lo[has]
    return ~dominated


def minkowski_rank_check(xi: Sequence, Q: int, c: Number):
    """Integer (b1, b2, b3) with |b1|,|b2| <= Q and |b1 xi1 + b2 xi2 + b3| < c Q^-2; rank of that set."""
    c = as_rational(c)
    if c <= 0:
        raise ValueError("c must be positive")
    xi = [as_exact(x) for x in xi]
    bound = c / Fraction(Q) ** 2
    sols = []
    for b1 in range(-Q, Q + 1):
        for b2 in range(-Q, Q + 1):
            bits = 64
            while True:
                w = Fraction(1, 1 << bits)
                x = xi[0].eval(w) * b1 + xi[1].eval(w) * b2
                lo3 = math.ceil(-x.hi - bound) - 1
                hi3 = math.floor(-x.lo + bound) + 1
                undecided = False
                found = []
                for b3 in range(lo3, hi3 + 1):
                    val = abs(x + b3)
                    if val.hi < bound:
                        found.append(b3)
                    elif val.lo < bound:
                        undecided = True
                if not undecided:
                    break
                bits *= 2
                if bits > MAX_BITS:
                    raise CertificationError("cannot decide the strict inequality")
            for b3 in found:
                if (b1, b2, b3) != (0, 0, 0):
                    sols.append((b1, b2, b3))
    wit = _three_independent(sols)
    if wit is None:
        return RankAtMost2(len(sols))
    return ThreeIndependent(wit, len(sols))


@dataclass(frozen=True)
class RankAtMost2:
    solutions: int


@dataclass(frozen=True)
class ThreeIndependent:
    witnesses: tuple
    solutions: int


def _three_independent(sols):
    basis: list = []
    for v in sols:
        trial = basis + [v]
        if _rank(trial) == len(trial):
            basis = trial
            if len(basis) == 3:
                return tuple(basis)
    return None


def _rank(vectors) -> int:
    rows = [[Fraction(x) for x in v] for v in vectors]
    r = 0
    cols = len(rows[0]) if rows else 0
    for col in range(cols):
        piv = next((i for i in range(r, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        for i in range(len(rows)):
            if i != r and rows[i][col] != 0:
                f = rows[i][col] / rows[r][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        r += 1
    return r


@dataclass(frozen=True)
class Found:
    b_hat: tuple
    b_tilde: tuple
    value: Interval


@dataclass(frozen=True)
class Empty:
    pass


def dirichlet_box_nonempty(problem: ApproxProblem, A: Number, B: Number, strict: bool = False,
                           budget: Optional[int] = None):
    """Decide whether max_j |(Omega z_hat)_j + z_tilde_j| <= A, |z_hat|_inf <= B has a nonzero
    integer solution (``strict`` switches both inequalities to <)."""
    A, B = as_rational(A), as_rational(B)
    if A < 0 or B <= 0:
        raise ValueError("need A >= 0 and B > 0")
    m, n = problem.m, problem.n
    ok_a = (lambda v: v < A) if strict else (lambda v: v <= A)
    R = math.ceil(B) - 1 if strict and B.denominator == 1 else math.floor(B)
    cands = []
    if R >= 1:
        boxprob = ApproxProblem(problem.omega, max_norm(n), max_norm(m))
        eng = _Engine(boxprob)
        _check_budget(n, R, 1, budget)
        for s in range(1, R + 1):
            Bs = canonical_shell(n, s)
            bt, q, err = eng.screen(Bs)
            sel = np.nonzero(q - err <= float(A))[0]
            for i in sel:
                c = eng.certify(Bs[i])
                bits = 80
                while True:
                    if c.q.hi < A or (not strict and c.q.hi == A and c.q.is_point):
                        cands.append(c)
                        break
                    if c.q.lo > A or (strict and c.q.lo >= A):
                        break
                    if c.exact and c.q.is_point:
                        if ok_a(c.q.lo):
                            cands.append(c)
                        break
                    bits *= 2
                    if bits > MAX_BITS:
                        raise CertificationError("box membership undecided")
                    c.refine(bits)
            if cands:
                best = min(cands, key=lambda c: (c.q.hi, c.sort_key))
                return Found(best.bhat, tuple(best.btilde), best.q)
    if ok_a(Fraction(1)):
        return Found((0,) * n, (1,) + (0,) * (m - 1), Interval.point(1))
    return Empty()


def records_table(records: Sequence[ApproxRecord]) -> list:
    return [r.to_json() for r in records]


def step_value(records: Sequence[ApproxRecord], t: Number) -> Interval:
    """psi(t) read off a record list via the step-function identity (t within the computed range)."""
    t = as_rational(t)
    val = None
    for r in records:
        if r.height.hi <= t:
            val = r.quality
        elif r.height.lo <= t:
            raise CertificationError("t coincides with an uncertified record height")
    if val is None:
        raise EmptyHeightRange(f"no record with height <= {t}")
    return val


__all__ = [
    "ApproxProblem", "ApproxRecord", "BudgetExceeded", "CertificationError", "EmptyHeightRange",
    "psi", "psi_with_witness", "best_approx_sequence", "minkowski_rank_check", "dirichlet_box_nonempty",
    "Found", "Empty", "RankAtMost2", "ThreeIndependent", "canonical_shell", "canonical_sign",
    "step_value", "default_budget", "DEFAULT_BUDGET", "rational_str", "Literal",
]
