"""Primal/dual convex bodies, the dual-parameter formulas of the transference
principle, brute-force verification of the implication for rational matrices,
an empirical calibration of the unspecified constant, and the transpose check.

Boxes use the max norm and the boundary convention <= throughout.  The dual
body constrains z_hat - Omega^T z_tilde, i.e. it is the Dirichlet box of the
transposed problem with the roles of the two variables exchanged.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .bestapprox import ApproxProblem, BudgetExceeded, box_count, default_budget
from .exactnum import Interval, Number, as_rational, rational_power_interval, root_interval, rational_str

PRIMAL = "primal"
DUAL = "dual"

CALIBRATION_FILE = "transfer_calibration.json"


# ---------------------------------------------------------------------------
# exact k-th roots of rationals

@dataclass(frozen=True)
class RootBound:
    """The positive real r**(1/k), kept exact for comparisons."""

    power: Fraction
    k: int

    def interval(self, bits: int = 64) -> Interval:
        return root_interval(self.power, self.k, bits)

    def admits(self, x: Number) -> bool:
        """x <= r**(1/k), decided exactly."""
        x = as_rational(x)
        return x <= 0 or x ** self.k <= self.power

    def floor(self) -> int:
        h = math.floor(self.interval(32).lo)
        while self.admits(h + 1):
            h += 1
        while h > 0 and not self.admits(h):
            h -= 1
        return h

    def scaled(self, C: Number) -> "RootBound":
        return RootBound(self.power * as_rational(C) ** self.k, self.k)

    def to_json(self) -> dict:
        return {"power": rational_str(self.power), "root": self.k, **self.interval().to_json()}


# ---------------------------------------------------------------------------
# boxes

def _rational_rows(omega) -> list:
    if isinstance(omega, ApproxProblem):
        rows = omega.rational_matrix()
        if rows is None:
            raise ValueError("transference checks need a rational matrix")
        return rows
    return [[as_rational(x) for x in r] for r in omega]


def _transpose(rows) -> list:
    return [list(c) for c in zip(*rows)]


def _box_min(rows, R: int, budget: Optional[int] = None):
    """Minimum over integer u with 0 < |u|_inf <= R of max_j dist((rows u)_j, Z), together with
    the value 1 attained by u = 0.  Returns (value, u, v) with v the rounding vector."""
    m, n = len(rows), len(rows[0])
    best = (Fraction(1), (0,) * n, (1,) + (0,) * (m - 1))
    if R < 1:
        return best
    budget = default_budget() if budget is None else budget
    if box_count(n, R) > budget:
        raise BudgetExceeded(f"box of radius {R} in dimension {n} exceeds the budget {budget}")
    D = math.lcm(*(x.denominator for r in rows for x in r))
    P = np.array([[int(x * D) for x in r] for r in rows], dtype=object)
    small = max(abs(int(p)) for p in P.flat) * R * n < 2 ** 62
    if small:
        P = P.astype(np.int64)
    rng = np.arange(-R, R + 1, dtype=np.int64)
    U = np.array(list(itertools.product(rng, repeat=n)), dtype=np.int64 if small else object)
    U = U[np.any(U != 0, axis=1)]
    S = U @ P.T                                  # numerators over D
    res = np.mod(S, D)
    dist = np.minimum(res, D - res)
    worst = dist.max(axis=1)
    i = int(np.argmin(worst))
    val = Fraction(int(worst[i]), D)
    if val < best[0]:
        u = tuple(int(x) for x in U[i])
        v = tuple(-_round_div(int(s), D) for s in S[i])
        best = (val, u, v)
    return best


def _round_div(s: int, D: int) -> int:
    """Nearest integer to s/D, ties towards +infinity."""
    return (2 * s + D) // (2 * D)


@dataclass(frozen=True)
class TransferBox:
    """M_{A,B}(Omega) (primal) or its dual counterpart, for a rational m x n Omega."""

    omega: tuple
    A: Fraction
    B: Fraction
    orientation: str = PRIMAL

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(tuple(r) for r in _rational_rows(self.omega)))
        object.__setattr__(self, "A", as_rational(self.A))
        object.__setattr__(self, "B", as_rational(self.B))
        if self.A <= 0 or self.B <= 0:
            raise ValueError("A and B must be positive")
        if self.orientation not in (PRIMAL, DUAL):
            raise ValueError(f"unknown orientation {self.orientation!r}")

    @property
    def m(self) -> int:
        return len(self.omega)

    @property
    def n(self) -> int:
        return len(self.omega[0])

    def contains(self, z: Sequence[int]) -> bool:
        n, m = self.n, self.m
        if len(z) != n + m:
            raise ValueError("point has the wrong dimension")
        zh, zt = z[:n], z[n:]
        if self.orientation == PRIMAL:
            forms = [sum(self.omega[j][i] * zh[i] for i in range(n)) + zt[j] for j in range(m)]
            return max(abs(f) for f in forms) <= self.A and max(abs(x) for x in zh) <= self.B
        forms = [zh[i] - sum(self.omega[j][i] * zt[j] for j in range(m)) for i in range(n)]
        return max(abs(f) for f in forms) <= self.B and max(abs(x) for x in zt) <= self.A

    def points(self) -> set:
        """All integer points of the box (including 0); small boxes only."""
        n, m = self.n, self.m
        out = set()
        if self.orientation == PRIMAL:
            free, rows, err, R = n, self.omega, self.A, math.floor(self.B)
        else:
            free, rows, err, R = m, _transpose(self.omega), self.B, math.floor(self.A)
        for u in itertools.product(range(-R, R + 1), repeat=free):
            vals = [sum(r[i] * u[i] for i in range(free)) for r in rows]
            if self.orientation == PRIMAL:
                ranges = [range(math.ceil(-x - err), math.floor(-x + err) + 1) for x in vals]
                out.update(tuple(u) + w for w in itertools.product(*ranges))
            else:
                ranges = [range(math.ceil(x - err), math.floor(x + err) + 1) for x in vals]
                out.update(w + tuple(u) for w in itertools.product(*ranges))
        return out

    def nonempty(self, budget: Optional[int] = None):
        """A nonzero integer point of the box, or None."""
        if self.orientation == PRIMAL:
            val, u, v = _box_min(self.omega, math.floor(self.B), budget)
            return (u + v) if val <= self.A else None
        val, u, v = _box_min(_transpose(self.omega), math.floor(self.A), budget)
        return (tuple(-x for x in v) + u) if val <= self.B else None


# ---------------------------------------------------------------------------
# dual parameters

@dataclass(frozen=True)
class DualParams:
    n: int
    m: int
    A: Fraction
    B: Fraction
    C: Fraction
    A_star: RootBound
    B_star: RootBound

    @property
    def exponents(self) -> dict:
        k = self.n + self.m - 1
        return {"A_star": [str(Fraction(self.n, k)), str(Fraction(1 - self.n, k))],
                "B_star": [str(Fraction(1 - self.m, k)), str(Fraction(self.m, k))]}

    def intervals(self, bits: int = 64) -> tuple:
        return self.A_star.interval(bits), self.B_star.interval(bits)

    def to_json(self) -> dict:
        return {"n": self.n, "m": self.m, "A": rational_str(self.A), "B": rational_str(self.B),
                "C": rational_str(self.C), "A_star": self.A_star.to_json(),
                "B_star": self.B_star.to_json(), "exponents": self.exponents}


def dual_params(n: int, m: int, A: Number, B: Number, C: Number = 1) -> DualParams:
    """A* = C (A^n B^(1-n))^(1/(n+m-1)),  B* = C (A^(1-m) B^m)^(1/(n+m-1))."""
    A, B, C = as_rational(A), as_rational(B), as_rational(C)
    if min(A, B, C) <= 0:
        raise ValueError("A, B, C must be positive")
    if n < 1 or m < 1:
        raise ValueError("n, m must be positive")
    k = n + m - 1
    a = RootBound(C ** k * A ** n * B ** (1 - n), k)
    b = RootBound(C ** k * A ** (1 - m) * B ** m, k)
    return DualParams(n, m, A, B, C, a, b)


# ---------------------------------------------------------------------------
# verification

@dataclass(frozen=True)
class TransferResult:
    status: str                      # ImplicationHolds | PrimalEmpty | CounterexampleAtThisC
    params: DualParams
    primal_witness: Optional[tuple] = None
    dual_witness: Optional[tuple] = None

    @property
    def passed(self) -> bool:
        return self.status != "CounterexampleAtThisC"

    def to_json(self) -> dict:
        return {"status": self.status, "params": self.params.to_json(),
                "primal_witness": list(self.primal_witness) if self.primal_witness else None,
                "dual_witness": list(self.dual_witness) if self.dual_witness else None}


def _dual_witness(rows_t, A_star: RootBound, B_star: RootBound, budget):
    """Nonzero integer point of the dual body with exact (root) bounds, or None."""
    val, u, v = _box_min(rows_t, A_star.floor(), budget)
    if B_star.admits(val):
        return tuple(-x for x in v) + u
    return None


def verify_transference(omega, A: Number, B: Number, C: Number, budget: Optional[int] = None) -> TransferResult:
    """Brute-force both bodies.  A counterexample only means C is too small."""
    rows = _rational_rows(omega)
    m, n = len(rows), len(rows[0])
    params = dual_params(n, m, A, B, C)
    primal = TransferBox(rows, A, B).nonempty(budget)
    if primal is None:
        return TransferResult("PrimalEmpty", params)
    dual = _dual_witness(_transpose(rows), params.A_star, params.B_star, budget)
    if dual is None:
        return TransferResult("CounterexampleAtThisC", params, primal)
    return TransferResult("ImplicationHolds", params, primal, dual)


def minimal_C_power(omega, A: Number, B: Number, budget: Optional[int] = None) -> Optional[Fraction]:
    """(C_min)^(n+m-1) for the smallest C whose dual body is nonempty, or None if the primal
    body is empty.  Exact: a dual point of height h and error e needs
    C^k >= max(h^k / a^k, e^k / b^k) with a, b the C = 1 parameters."""
    rows = _rational_rows(omega)
    m, n = len(rows), len(rows[0])
    if TransferBox(rows, A, B).nonempty(budget) is None:
        return None
    p = dual_params(n, m, A, B, 1)
    k, ak, bk = n + m - 1, p.A_star.power, p.B_star.power
    rt = _transpose(rows)
    best = Fraction(1) ** k / bk          # z_tilde = 0, z_hat = e_1
    h = 1
    while Fraction(h) ** k / ak < best:
        val, _, _ = _box_min(rt, h, budget)
        best = min(best, max(Fraction(h) ** k / ak, val ** k / bk))
        h += 1
    return best


def random_rational_matrix(rng: np.random.Generator, m: int, n: int, max_den: int = 50) -> list:
    rows = []
    for _ in range(m):
        row = []
        for _ in range(n):
            d = int(rng.integers(1, max_den + 1))
            row.append(Fraction(int(rng.integers(-d, d + 1)), d))
        rows.append(row)
    return rows


DEFAULT_A_GRID = tuple(Fraction(1, 2 ** k) for k in range(7))
DEFAULT_B_GRID = tuple(Fraction(2 ** j) for j in range(6))


@dataclass
class Calibration:
    n: int
    m: int
    C: Fraction                      # rational upper bound, rounded up to 1/1000
    C_power_max: Fraction
    trials: int
    nonvacuous: int
    seed: int
    max_den: int
    A_grid: tuple = DEFAULT_A_GRID
    B_grid: tuple = DEFAULT_B_GRID

    def to_json(self) -> dict:
        return {"n": self.n, "m": self.m, "C": rational_str(self.C),
                "C_power_max": rational_str(self.C_power_max), "trials": self.trials,
                "nonvacuous": self.nonvacuous, "seed": self.seed, "max_den": self.max_den,
                "A_grid": [rational_str(a) for a in self.A_grid],
                "B_grid": [rational_str(b) for b in self.B_grid], "rigorous": False}

    @classmethod
    def from_json(cls, d: dict) -> "Calibration":
        return cls(d["n"], d["m"], Fraction(d["C"]), Fraction(d["C_power_max"]), d["trials"],
                   d["nonvacuous"], d["seed"], d["max_den"],
                   tuple(Fraction(a) for a in d["A_grid"]), tuple(Fraction(b) for b in d["B_grid"]))


def calibration_matrices(n: int, m: int, trials: int = 200, seed: int = 0, max_den: int = 50) -> list:
    rng = np.random.Generator(np.random.Philox(key=[seed, 1000 * n + m]))
    return [random_rational_matrix(rng, m, n, max_den) for _ in range(trials)]


def _trial_worst(job) -> tuple:
    rows, A_grid, B_grid, budget = job
    worst, count = Fraction(0), 0
    for A in A_grid:
        for B in B_grid:
            cp = minimal_C_power(rows, A, B, budget)
            if cp is not None:
                count += 1
                worst = max(worst, cp)
    return worst, count


def calibrate(n: int, m: int, trials: int = 200, seed: int = 0, max_den: int = 50,
              A_grid: Sequence = DEFAULT_A_GRID, B_grid: Sequence = DEFAULT_B_GRID,
              budget: Optional[int] = None, jobs: int = 1) -> Calibration:
    """Empirical (non-rigorous) smallest C passing every trial of the sweep.

    Trials are independent; with ``jobs`` > 1 they run in worker processes and
    the max/sum reduction makes the result schedule-independent.
    """
    work = [(rows, tuple(A_grid), tuple(B_grid), budget)
            for rows in calibration_matrices(n, m, trials, seed, max_den)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as pool:
            parts = list(pool.map(_trial_worst, work, chunksize=8))
    else:
        parts = [_trial_worst(w) for w in work]
    worst = max((w for w, _ in parts), default=Fraction(0))
    count = sum(c for _, c in parts)
    k = n + m - 1
    hi = root_interval(worst, k, 64).hi if worst else Fraction(0)
    C = Fraction(math.ceil(hi * 1000), 1000) or Fraction(1, 1000)
    return Calibration(n, m, C, worst, trials, count, seed, max_den, tuple(A_grid), tuple(B_grid))


def save_calibration(path, entries: Sequence[Calibration]) -> None:
    data = {f"{c.n},{c.m}": c.to_json() for c in entries}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_calibration(path=None) -> dict:
    if path is None:
        text = resources.files(__package__).joinpath("data").joinpath(CALIBRATION_FILE).read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return {tuple(int(x) for x in key.split(",")): Calibration.from_json(v)
            for key, v in json.loads(text).items()}


def calibrated_C(n: int, m: int, path=None) -> Fraction:
    """Shipped empirical constant for (n, m); computed on the fly if absent."""
    try:
        table = load_calibration(path)
    except FileNotFoundError:
        table = {}
    if (n, m) in table:
        return table[(n, m)].C
    return calibrate(n, m).C


# ---------------------------------------------------------------------------
# box invariants

def box_symmetric(box: TransferBox) -> bool:
    pts = box.points()
    return all(tuple(-x for x in p) in pts for p in pts)


def box_monotone(small: TransferBox, large: TransferBox) -> bool:
    if small.A > large.A or small.B > large.B:
        raise ValueError("first box must have the smaller parameters")
    return small.points() <= large.points()


# ---------------------------------------------------------------------------
# transpose pipeline

def transpose_delta(n: int, m: int, rho: Number, C: Number = 1, bits: int = 64) -> Interval:
    """delta = C^((m+n)/n) rho^(m/(n(n+m-1)))."""
    c = rational_power_interval(C, Fraction(m + n, n), bits)
    r = rational_power_interval(rho, Fraction(m, n * (n + m - 1)), bits)
    return c * r


@dataclass
class TransposeReport:
    delta: Interval
    di_heights: list
    total_heights: int
    tail_sup: Interval
    probe: dict = field(repr=False)

    @property
    def di_fraction(self) -> Fraction:
        return Fraction(len(self.di_heights), self.total_heights)

    def to_json(self) -> dict:
        return {"kind": "finite-height evidence", "delta": self.delta.to_json(),
                "di_heights": self.di_heights, "total_heights": self.total_heights,
                "non_sing_constant": self.tail_sup.to_json(), "probe": self.probe}


def transpose_folklore_check(problem: ApproxProblem, c: Number, rho: Number, heights: Sequence[Number],
                             C: Number = 1, budget: Optional[int] = None) -> TransposeReport:
    """Finite-height evidence that the transpose is Dirichlet improvable at the constant delta
    and not singular.

    The non-singularity evidence is reported as the largest constant kappa for which the
    transposed box of size kappa * u^(-m/n) stays empty at some height in the upper half of
    the probe (a supremum over that tail); no threshold is asserted.
    """
    from .spectrum import membership_probe
    n, m = problem.n, problem.m
    delta = transpose_delta(n, m, rho, C)
    tp = problem.transpose()
    probe = membership_probe(tp, delta.lo, heights, budget=budget)
    rows = probe["rows"]
    tail = rows[len(rows) // 2:]
    vals = [Interval.from_json(r["t^e_psi"]) for r in tail]
    tail_sup = Interval(max(v.lo for v in vals), max(v.hi for v in vals))
    probe["c"] = rational_str(as_rational(c))
    return TransposeReport(delta, probe["di_witness_heights"], len(rows), tail_sup, probe)


__all__ = [
    "PRIMAL", "DUAL", "RootBound", "TransferBox", "DualParams", "dual_params", "TransferResult",
    "verify_transference", "minimal_C_power", "random_rational_matrix", "Calibration",
    "calibration_matrices", "calibrate", "save_calibration", "load_calibration", "calibrated_C",
    "box_symmetric", "box_monotone", "transpose_delta", "TransposeReport", "transpose_folklore_check",
]
