"""Independent reference implementations used to cross-check the library.

Nothing here imports dirichlet_lab: the rational oracle works in exact integer
arithmetic over full max-norm shells, the continued-fraction oracle runs the
classical (P + sqrt(D)) / Q recurrence.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def shell(n: int, h: int) -> np.ndarray:
    """All integer vectors of max-norm exactly h in Z^n."""
    r = np.arange(-h, h + 1, dtype=np.int64)
    pts = np.array(list(itertools.product(r, repeat=n)), dtype=np.int64).reshape(-1, n)
    return pts[np.abs(pts).max(axis=1) == h]


def rational_records(rows, cap: int):
    """Best-approximation records (height, quality, b_hat) for a rational m x n
    matrix under max norms, by brute force over every shell up to ``cap``."""
    D = math.lcm(*(Fraction(x).denominator for r in rows for x in r))
    P = np.array([[int(Fraction(x) * D) for x in r] for r in rows], dtype=np.int64)
    n = P.shape[1]
    best = None
    out = []
    for h in range(1, cap + 1):
        B = shell(n, h)
        res = np.mod(B @ P.T, D)
        q = np.minimum(res, D - res).max(axis=1)
        i = int(np.argmin(q))
        val = Fraction(int(q[i]), D)
        if best is None or val < best:
            best = val
            out.append((h, val, tuple(int(x) for x in B[i])))
            if val == 0:
                break
    return out


def quality_of(rows, b_hat, b_tilde) -> Fraction:
    vals = [sum(Fraction(x) * b for x, b in zip(r, b_hat)) + t for r, t in zip(rows, b_tilde)]
    return max(abs(v) for v in vals)


def cf_quadratic(a: int, b: int, d: int, c: int, terms: int):
    """Partial quotients of (a + b sqrt(d)) / c with b > 0, c > 0, d not a square."""
    P, D, Q = a * c, b * b * d * c * c, c * c
    s = math.isqrt(D)
    out = []
    for _ in range(terms):
        if Q > 0:
            q = (P + s) // Q
        else:
            q = -((P + s) // -Q) - 1
        out.append(q)
        P = q * Q - P
        Q = (D - P * P) // Q
    return out


def convergent_denominators(a: int, b: int, d: int, c: int, cap: int):
    """(q_k, p_k) for the convergents with 1 <= q_k <= cap, duplicates removed."""
    pq = cf_quadratic(a, b, d, c, 200)
    p0, q0 = 1, 0
    p1, q1 = pq[0], 1
    out = [(q1, p1)]
    for x in pq[1:]:
        p0, q0, p1, q1 = p1, q1, x * p1 + p0, x * q1 + q0
        if q1 > cap:
            break
        if q1 == out[-1][0]:
            out[-1] = (q1, p1)
        else:
            out.append((q1, p1))
    return out


def golden_theta() -> float:
    return (1 + math.sqrt(5)) / 2 / math.sqrt(5)
