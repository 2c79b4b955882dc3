"""Dirichlet-constant estimates, best-approximation classification for the
prime-power construction, finite-height membership evidence, survival
sampling of random extensions, and integer-relation probes."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .bestapprox import (
    ApproxProblem,
    ApproxRecord,
    BudgetExceeded,
    CertificationError,
    best_approx_sequence,
    box_count,
    default_budget,
    psi,
)
from .constants import survival_floor
from .constructions import PrimePowerState, SignVariedState, sample_extension
from .exactnum import (
    ExactReal,
    Interval,
    InsufficientLevels,
    Number,
    as_exact,
    as_rational,
    interval_power,
)

DEFAULT_TOL = Fraction(1, 20)


class ProvenanceError(ValueError):
    pass


class PrecisionExhausted(ArithmeticError):
    pass


def _pow(x: Interval, e: Fraction) -> Interval:
    if e.denominator == 1:
        return x ** int(e)
    return interval_power(x, e, 80)


# ---------------------------------------------------------------------------
# Theta estimates

@dataclass
class SpectrumEstimate:
    exponent: Fraction
    theta_sup: Interval
    theta_inf: Interval
    window: tuple                 # (v_min, v_max)
    per_v: list
    running_sup: list             # cumulative sup over the window, one entry per v
    converged: bool
    terminal: bool = False
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "exponent": str(self.exponent),
            "theta_sup": self.theta_sup.to_json(),
            "theta_inf": self.theta_inf.to_json(),
            "window": list(self.window),
            "converged": self.converged,
            "terminal": self.terminal,
            "running_sup": [x.to_json() for x in self.running_sup],
            "per_v": self.per_v,
            "notes": self.notes,
        }


def affordable_cap(problem: ApproxProblem, budget: Optional[int] = None) -> int:
    """Largest max-norm radius R whose enumeration box fits in the budget."""
    budget = default_budget() if budget is None else budget
    from .bestapprox import _Engine
    offsets = _Engine(problem).offsets.shape[0]
    lo, hi = 1, 2
    while box_count(problem.n, hi) * offsets <= budget:
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if box_count(problem.n, mid) * offsets <= budget:
            lo = mid
        else:
            hi = mid
    return lo


def records_up_to(problem: ApproxProblem, cap: Number, budget: Optional[int] = None):
    """best_approx_sequence with the cap lowered to what the budget allows.

    Returns (records, cap_used, clamped).
    """
    cap = as_rational(cap)
    try:
        return best_approx_sequence(problem, cap, budget), cap, False
    except BudgetExceeded:
        R = affordable_cap(problem, budget)
        # for max heights R is the cap; otherwise scale by the equivalence constant
        c2 = Fraction(R) * problem.norm1.equiv_lo
        return best_approx_sequence(problem, c2, budget), c2, True


def theta_estimate(records: Sequence[ApproxRecord], exponent: Number,
                   window: Optional[tuple] = None, min_height: Optional[Number] = None,
                   tol: Number = DEFAULT_TOL) -> SpectrumEstimate:
    """Window sup of L_v M_{v+1}^e and inf of L_v M_v^e.

    Records with a successor supply L_v M_{v+1}^e.  The window defaults to
    the records with height >= min_height when given, else the second half of
    the records that have successors.  ``converged`` is set when the last
    three cumulative window maxima agree within relative ``tol``.
    """
    e = as_rational(exponent)
    tol = as_rational(tol)
    if not records:
        raise ValueError("empty record list")
    for a, b in zip(records, records[1:]):
        if not (a.height.hi <= b.height.lo and b.quality.hi <= a.quality.lo):
            if not (a.height.hi < b.height.hi and b.quality.lo < a.quality.hi):
                raise ValueError("records are not monotone")
    last = records[-1]
    zero = Interval.point(0)
    if last.quality.is_point and last.quality.lo == 0:
        per = [{"v": r.index, "M": r.height.to_json(), "L": r.quality.to_json()} for r in records]
        return SpectrumEstimate(e, zero, zero, (records[0].index, last.index), per, [zero], True,
                                terminal=True, notes=["psi vanishes beyond the last record"])
    per_v = []
    ups = []
    lows = []
    for i, r in enumerate(records):
        row = {"v": r.index, "b": list(r.b), "M": r.height.to_json(), "L": r.quality.to_json()}
        low = r.quality * _pow(r.height, e)
        row["L_M^e"] = low.to_json()
        if i + 1 < len(records):
            nxt = records[i + 1].height
            up = r.quality * _pow(nxt, e)
            row["L_Mnext^e"] = up.to_json()
            row["T"] = str(nxt.hi - Fraction(1, 2)) if nxt.is_point else None
            ups.append((r, up))
        lows.append((r, low))
        per_v.append(row)
    notes = []
    if not ups:
        raise ValueError("need at least two records for a window estimate")
    if window is not None:
        vmin, vmax = window
    elif min_height is not None:
        mh = as_rational(min_height)
        cand = [r.index for r, _ in ups if r.height.lo >= mh]
        if not cand:
            raise ValueError(f"no record of height >= {min_height} with a successor")
        vmin, vmax = cand[0], ups[-1][0].index
    else:
        vmin, vmax = ups[len(ups) // 2][0].index, ups[-1][0].index
    sel = [(r, u) for r, u in ups if vmin <= r.index <= vmax]
    if not sel:
        raise ValueError(f"window {vmin}..{vmax} is empty")
    running = []
    cur = None
    for _, u in sel:
        cur = u if cur is None else cur.max(u)
        running.append(cur)
    sup = running[-1]
    inf_sel = [lo for r, lo in lows if vmin <= r.index <= vmax + 1]
    inf = inf_sel[0]
    for x in inf_sel[1:]:
        inf = inf.min(x)
    if len(running) >= 3:
        tail = running[-3:]
        top = max(x.hi for x in tail)
        bot = min(x.lo for x in tail)
        converged = top - bot <= tol * top
    else:
        converged = False
        notes.append("fewer than three window records")
    return SpectrumEstimate(e, sup, inf, (vmin, vmax), per_v, running, converged, notes=notes)


def tT_grid_check(problem: ApproxProblem, records: Sequence[ApproxRecord], exponent: Number,
                  delta: Number = Fraction(1, 64), per_gap: int = 3) -> dict:
    """Compare the running max of t^e psi(t) on a rational grid with L_v M_{v+1}^e.

    For each gap [M_v, M_{v+1}) the grid holds ``per_gap`` interior points and
    M_{v+1} - delta; psi is recomputed independently at every grid point.  The
    grid maximum over the gap must lie in [(M_{v+1}-delta)^e L_v, M_{v+1}^e L_v].
    Heights must be exact (point intervals).
    """
    e = as_rational(exponent)
    delta = as_rational(delta)
    rows = []
    ok = True
    run_grid = run_rec = None
    for a, b in zip(records, records[1:]):
        if not (a.height.is_point and b.height.is_point):
            raise CertificationError("grid check needs exact record heights")
        M0, M1 = a.height.lo, b.height.lo
        pts = [M0 + (M1 - M0) * Fraction(k, per_gap + 1) for k in range(per_gap + 1)] + [M1 - delta]
        pts = sorted({p for p in pts if M0 <= p < M1})
        gmax = None
        for t in pts:
            val = psi(problem, t, width=Fraction(1, 10 ** 30)) * _pow(Interval.point(t), e)
            gmax = val if gmax is None else gmax.max(val)
        upper = a.quality * _pow(Interval.point(M1), e)
        lower = a.quality * _pow(Interval.point(M1 - delta), e)
        inside = gmax.lo >= lower.lo - Fraction(1, 10 ** 25) and gmax.hi <= upper.hi + Fraction(1, 10 ** 25)
        ok &= inside
        run_grid = gmax if run_grid is None else run_grid.max(gmax)
        run_rec = upper if run_rec is None else run_rec.max(upper)
        rows.append({"v": a.index, "grid_max": float(gmax.mid), "record_value": float(upper.mid),
                     "running_grid": float(run_grid.mid), "running_records": float(run_rec.mid),
                     "consistent": inside})
    return {"ok": ok, "delta": str(delta), "rows": rows}


# ---------------------------------------------------------------------------
# classification against the six shapes

@dataclass
class ClassificationReport:
    verdicts: list                 # (index, height, b, label) with label "Other" when unmatched
    threshold_height: Optional[Interval]
    threshold_index: Optional[int]
    classified_above: int
    others: list

    def to_json(self) -> dict:
        return {
            "verdicts": [{"v": v, "height": h.to_json(), "b": list(b), "form": lab}
                         for v, h, b, lab in self.verdicts],
            "threshold_height": self.threshold_height.to_json() if self.threshold_height else None,
            "threshold_index": self.threshold_index,
            "classified_above": self.classified_above,
            "others": [{"v": v, "b": list(b)} for v, b in self.others],
        }


def _full_forms(state) -> dict:
    """Map canonical integer vectors to labels for every level of the construction."""
    if isinstance(state, SignVariedState):
        base, m = state.base, state.m
        Fk = [state.F(k) for k in range(m)]
        Gk = [state.G(k) for k in range(m)]

        def v(j):
            return (base.A[j - 1], 0) + tuple(-Fk[k][j - 1] for k in range(m))

        def w(j):
            return (0, base.B[j - 1]) + tuple(-Gk[k][j - 1] for k in range(m))
    elif isinstance(state, PrimePowerState):
        base = state
        v, w = state.v, state.w
    else:
        raise ProvenanceError("classification needs a prime-power or sign-varied state")

    def add(x, y, s=1):
        return tuple(a + s * b for a, b in zip(x, y))

    out = {}
    for j in range(1, base.depth + 1):
        cands = {f"v_{j}": v(j), f"w_{j}": w(j), f"v_{j}+w_{j}": add(v(j), w(j)),
                 f"w_{j}-v_{j}": add(w(j), v(j), -1)}
        if j < base.depth:
            cands[f"w_{j}+v_{j + 1}"] = add(w(j), v(j + 1))
            cands[f"v_{j + 1}-w_{j}"] = add(v(j + 1), w(j), -1)
        for lab, vec in cands.items():
            out.setdefault(_canon(vec), lab)
    return out


def _canon(vec) -> tuple:
    for x in vec:
        if x:
            return tuple(vec) if x > 0 else tuple(-y for y in vec)
    return tuple(vec)


def classify_records(state, records: Sequence[ApproxRecord]) -> ClassificationReport:
    """Match each record's integer vector, up to sign, against the six shapes of every level.

    The threshold is the first record from which every later record classifies.
    """
    forms = _full_forms(state)
    width = len(next(iter(forms)))
    verdicts = []
    others = []
    for r in records:
        b = tuple(r.b)
        if len(b) != width:
            raise ProvenanceError(f"record of length {len(b)} does not fit a construction of width {width}")
        lab = forms.get(_canon(b), "Other")
        verdicts.append((r.index, r.height, b, lab))
        if lab == "Other":
            others.append((r.index, b))
    # first index after the last Other
    k = len(verdicts)
    while k > 0 and verdicts[k - 1][3] != "Other":
        k -= 1
    if k < len(verdicts):
        th_idx, th_h = verdicts[k][0], verdicts[k][1]
    else:
        th_idx, th_h = None, None
    return ClassificationReport(verdicts, th_h, th_idx, len(verdicts) - k, others)


# ---------------------------------------------------------------------------
# membership evidence

def membership_probe(problem: ApproxProblem, c: Number, heights: Sequence[Number],
                     records: Optional[Sequence[ApproxRecord]] = None,
                     budget: Optional[int] = None) -> dict:
    """Finite-height evidence for Di(c), Sing and Bad at the given heights.

    Every output is evidence at the listed heights only, never a proof of the
    asymptotic property.
    """
    from .bestapprox import step_value
    c = as_rational(c)
    hs = [as_rational(h) for h in heights]
    if any(b <= a for a, b in zip(hs, hs[1:])):
        raise ValueError("heights must be increasing")
    e = Fraction(problem.n, problem.m)
    if records is None:
        records = best_approx_sequence(problem, hs[-1], budget)
    rows = []
    di, viol, zero_from = [], [], None
    running = None
    for t in hs:
        val = step_value(records, t) * _pow(Interval.point(t), e)
        running = val if running is None else running.min(val)
        if val.hi <= c:
            di.append(str(t))
        elif val.lo > c:
            viol.append(str(t))
        if val.is_point and val.lo == 0 and zero_from is None:
            zero_from = str(t)
        rows.append({"t": str(t), "t^e_psi": val.to_json(), "running_min": running.to_json()})
    return {
        "kind": "finite-height evidence",
        "c": str(c),
        "exponent": str(e),
        "di_witness_heights": di,
        "sing_violation_heights": viol,
        "bad_lower_bound": running.to_json(),
        "psi_zero_from": zero_from,
        "rows": rows,
    }


# ---------------------------------------------------------------------------
# survival of random extensions

@dataclass
class SurvivalReport:
    n: int
    v: int
    L_v: Interval
    T_v: Fraction
    trials: int
    survivors: int
    outcomes: list
    floor: Optional[Interval]
    status: str = "enumerated"

    @property
    def fraction(self) -> Optional[float]:
        return self.survivors / self.trials if self.trials and self.status == "enumerated" else None

    @property
    def sigma(self) -> float:
        """Binomial standard error at the theoretical floor (clipped to [0, 1])."""
        p = 0.0 if self.floor is None else min(1.0, max(0.0, float(self.floor.mid)))
        return math.sqrt(p * (1 - p) / max(1, self.trials))

    def meets_floor(self) -> Optional[bool]:
        if self.floor is None or self.fraction is None:
            return None
        return self.fraction >= float(self.floor.lo) - 2 * self.sigma

    def to_json(self) -> dict:
        return {
            "n": self.n, "v": self.v, "L_v": self.L_v.to_json(), "T_v": str(self.T_v),
            "trials": self.trials, "survivors": self.survivors, "fraction": self.fraction,
            "floor": self.floor.to_json() if self.floor is not None else None,
            "sigma": self.sigma, "meets_floor": self.meets_floor(), "status": self.status,
            "outcomes": self.outcomes,
        }


def level_T(records: Sequence[ApproxRecord], v: int) -> Fraction:
    """T_v = M_{v+1} - 1/2 (exact heights only)."""
    nxt = records[v]  # records are 1-indexed
    if not nxt.height.is_point:
        raise CertificationError("T_v needs an exact next height")
    return nxt.height.lo - Fraction(1, 2)


def survival_levels(records: Sequence[ApproxRecord], T_max: Number) -> list:
    """Indices v (with a successor) whose T_v <= T_max."""
    T_max = as_rational(T_max)
    return [r.index for r in records[:-1] if level_T(records, r.index) <= T_max]


def extension_survives(xi: Sequence, gamma: Sequence, L_v: Interval, T_v: Number,
                       bits: int = 80) -> tuple:
    """Does every x with (x_3..x_n) != 0 and max |x_j| <= T_v give |x . (xi, gamma) - y| > L_v?

    Returns (survives, witness) where witness is a violating (x, y) or None.
    Screening uses sorted floating residues; candidates within 1e-9 of the
    threshold are decided with certified intervals.
    """
    T = math.floor(as_rational(T_v))
    xi = [as_exact(x) for x in xi]
    gamma = [as_exact(g) for g in gamma]
    if len(xi) != 2:
        raise ValueError("base vector must lie in R^2")
    if not gamma:
        raise ValueError("empty extension")
    fx = [float(x.eval_bits(bits).mid) for x in xi]
    fg = [float(g.eval_bits(bits).mid) for g in gamma]
    L = float(L_v.mid)
    rng = np.arange(-T, T + 1)
    X1, X2 = np.meshgrid(rng, rng, indexing="ij")
    X1, X2 = X1.ravel(), X2.ravel()
    u = np.mod(X1 * fx[0] + X2 * fx[1], 1.0)
    order = np.argsort(u)
    us = u[order]
    us_ext = np.concatenate([us - 1.0, us, us + 1.0])
    idx_ext = np.concatenate([order, order, order])
    margin = 1e-9
    k = len(gamma)
    tails = np.array(list(itertools.product(rng, repeat=k)), dtype=np.int64)
    # half of the tails suffice: (x, y) and (-x, -y) give the same value
    first = np.array([next((v for v in row if v), 0) for row in tails])
    tails = tails[first > 0]
    s = np.mod(tails @ np.array(fg), 1.0)
    target = np.mod(-s, 1.0)
    lo = np.searchsorted(us_ext, target - L - margin, side="left")
    hi = np.searchsorted(us_ext, target + L + margin, side="right")
    hits = np.nonzero(hi > lo)[0]
    tie = None
    for h in hits:
        for pos in range(lo[h], hi[h]):
            i = idx_ext[pos]
            x = (int(X1[i]), int(X2[i])) + tuple(int(t) for t in tails[h])
            d = abs(((us_ext[pos] + s[h]) + 0.5) % 1.0 - 0.5)
            if d < L - margin:
                return False, _witness(x, xi + gamma, bits)
            # near the threshold: certify
            val, y = _exact_value(x, xi + gamma, bits)
            if not (val.hi <= L_v.lo or val.lo > L_v.hi):
                val, y = _exact_value(x, xi + gamma, bits * 8)
            if val.hi <= L_v.lo and not (val.is_point and L_v.is_point and val.lo == L_v.lo):
                if val.hi < L_v.lo:
                    return False, (x, y)
            if not val.lo > L_v.hi:
                # equal to L_v or not separable: the level-v record is no longer the unique minimizer
                tie = tie or (x, y)
    if tie is not None:
        return False, tie
    return True, None


def _exact_value(x, coords, bits):
    acc = Interval.point(0)
    for xi, c in zip(x, coords):
        if xi:
            acc = acc + c.eval_bits(bits) * xi
    y = math.floor(acc.mid + Fraction(1, 2))
    return abs(acc - y), y


def _witness(x, coords, bits):
    return x, _exact_value(x, coords, bits)[1]


def survival_sample(xi: Sequence, n: int, records: Sequence[ApproxRecord], v: int, trials: int,
                    prng_seed: int = 0, grid_bits: int = 20, budget: Optional[int] = None) -> SurvivalReport:
    """Sample extensions gamma in the unit ball of R^{n-2} and test survival at level v.

    Trial i uses seed (prng_seed * 1_000_003 + i).  Survival at v means that
    no integer x with a nonzero extension part and max |x_j| <= T_v beats
    L_v, i.e. the level-v record stays the best approximation of (xi, gamma)
    at T_v.  The floor 1 - covering_bound/vol(B_{n-2}) is reported for n >= 4.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if n < 3:
        raise ValueError("extensions need n >= 3")
    if not 1 <= v < len(records):
        raise ValueError("v must have a successor record")
    rec = records[v - 1]
    T = level_T(records, v)
    L = rec.quality
    floor = survival_floor(n, L, T)
    budget = default_budget() if budget is None else budget
    side = 2 * math.floor(T) + 1
    count = side ** 2 + side ** (n - 2)
    if count > budget:
        return SurvivalReport(n, v, L, T, trials, 0, [], floor, status="bound-only")
    outcomes = []
    surv = 0
    for i in range(trials):
        seed = prng_seed * 1_000_003 + i
        g = sample_extension(n - 2, seed, grid_bits)
        ok, wit = extension_survives(xi, g, L, T)
        surv += ok
        outcomes.append({"seed": seed, "gamma": [str(x) for x in g], "survives": ok,
                         "witness": None if wit is None else {"x": list(wit[0]), "y": wit[1]}})
    return SurvivalReport(n, v, L, T, trials, surv, outcomes, floor)


# ---------------------------------------------------------------------------
# integer relations

@dataclass(frozen=True)
class NoRelationFound:
    height_bound: int
    note: str = "finite-height evidence only"

    def to_json(self):
        return {"kind": "none", "height_bound": self.height_bound, "note": self.note}


@dataclass(frozen=True)
class Relation:
    coeffs: tuple        # (a_1, ..., a_k, a_0): sum a_i x_i + a_0 = 0

    def to_json(self):
        return {"kind": "relation", "coeffs": list(self.coeffs)}


def integer_relation_probe(values: Sequence, height_bound: int, bits: int = 96):
    """Search a_1..a_k, a_0 with max |a| <= height_bound and sum a_i x_i + a_0 == 0.

    Returns the relation of least max-norm (lexicographically least after
    making the first nonzero coefficient positive), or NoRelationFound once
    every other candidate is certified nonzero.
    """
    if height_bound < 1:
        raise ValueError("height_bound must be >= 1")
    xs = [as_exact(v) for v in values]
    k = len(xs)
    H = int(height_bound)
    rats = [x.rational_value for x in xs]
    try:
        fl = np.array([float(x.eval_bits(bits).mid) for x in xs])
    except InsufficientLevels as exc:
        raise PrecisionExhausted(str(exc)) from exc
    if k == 0:
        return NoRelationFound(H)
    rng = np.arange(-H, H + 1)
    found = []
    # the last value's coefficient is vectorized; the others are looped
    for head in itertools.product(rng, repeat=k - 1):
        coeffs = np.empty((rng.size, k), dtype=np.int64)
        coeffs[:, :k - 1] = head
        coeffs[:, k - 1] = rng
        s = coeffs @ fl
        a0 = -np.rint(s)
        res = np.abs(s + a0)
        tol = 1e-9 * (1 + np.abs(coeffs).sum(axis=1))
        for i in np.nonzero((np.abs(a0) <= H) & (res < tol))[0]:
            a = tuple(int(t) for t in coeffs[i]) + (int(a0[i]),)
            if any(a) and _is_relation(a, xs, rats, bits):
                found.append(_canon(a))
    if not found:
        return NoRelationFound(H)
    found = sorted(set(found), key=lambda a: (max(abs(t) for t in a), a))
    return Relation(found[0])


def _is_relation(a, xs, rats, bits) -> bool:
    if all(r is not None for r in rats):
        return sum(Fraction(c) * r for c, r in zip(a, rats)) + a[-1] == 0
    b = bits
    while b <= 1 << 14:
        try:
            acc = Interval.point(a[-1])
            for c, x in zip(a, xs):
                if c:
                    acc = acc + x.eval_bits(b) * c
        except InsufficientLevels as exc:
            raise PrecisionExhausted(f"cannot certify {a}: {exc}") from exc
        if acc.is_point:
            return acc.lo == 0
        if acc.lo > 0 or acc.hi < 0:
            return False
        b *= 2
    raise PrecisionExhausted(f"cannot decide whether {a} annihilates the values")


__all__ = [
    "SpectrumEstimate", "theta_estimate", "tT_grid_check", "affordable_cap", "records_up_to",
    "ClassificationReport", "classify_records", "membership_probe", "SurvivalReport",
    "survival_sample", "survival_levels", "extension_survives", "level_T",
    "NoRelationFound", "Relation", "integer_relation_probe", "ProvenanceError", "PrecisionExhausted",
]
