"""dirichlet-lab: command-line front end.

Every JSON artifact carries "schema": 1, the full run configuration and the
digest of the construction state it was computed from.  Output files are
written atomically.  Exit codes: 2 usage, 3 budget exceeded, 4 invariant
violation, 1 any other failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import warnings
from fractions import Fraction
from pathlib import Path

from . import __version__
from .bestapprox import (
    ApproxProblem,
    BudgetExceeded,
    CertificationError,
    default_budget,
    psi_with_witness,
)
from .constants import cn_forms_agree, cn_threshold, cn_threshold_ball, parse_range
from .constructions import (
    InvariantViolation,
    LevelBudgetExceeded,
    PrimePowerState,
    SignVariedState,
    TwoScaleState,
    build_prime_power,
    build_sign_varied,
    build_two_scale,
    state_from_json,
    state_rows,
)
from .exactnum import InsufficientLevels, Interval, parse_exact, rational_str
from .normspace import max_norm, norm_from_json

SCHEMA = 1
EXIT_FAILURE, EXIT_USAGE, EXIT_BUDGET, EXIT_INVARIANT = 1, 2, 3, 4

SEQ_CSV_HELP = "CSV columns: v, b_1..b_{n+m}, M_lo, M_hi, L_lo, L_hi"
CONSTANTS_CSV_HELP = "CSV columns: n, gamma_lo, gamma_hi, ball_lo, ball_hi, forms_agree, symbolic"
PLOT_CSV_HELP = "plot CSV columns: v, t, tpsi_lo, tpsi_hi (t^e psi(t) at both ends of each step)"


class UsageError(ValueError):
    pass


def rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def int_list(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}")


# ---------------------------------------------------------------------------
# output plumbing

def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _plain(v):
    if isinstance(v, Fraction):
        return rational_str(v)
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def run_config(args) -> dict:
    return {k: _plain(v) for k, v in sorted(vars(args).items()) if k != "func"}


def envelope(args, result, digest=None) -> dict:
    return {"schema": SCHEMA, "command": args.command, "version": __version__,
            "config": run_config(args), "state_digest": digest, "result": result}


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def emit(args, text: str, path=None) -> None:
    path = path or args.out
    if path:
        write_atomic(path, text)
    else:
        sys.stdout.write(text)


def compact_json(obj):
    """Outward-round over-long interval endpoints in a report (never in state files)."""
    if isinstance(obj, dict):
        if isinstance(obj.get("lo"), str) and isinstance(obj.get("hi"), str):
            try:
                iv = Interval(Fraction(obj["lo"]), Fraction(obj["hi"]))
            except (ValueError, ZeroDivisionError):
                pass
            else:
                obj = dict(obj, **iv.compact().to_json())
        return {k: compact_json(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [compact_json(v) for v in obj]
    return obj


def emit_json(args, result, digest=None, exact=False) -> None:
    if not exact:
        result = compact_json(result)
    emit(args, dumps(envelope(args, result, digest)))


def emit_csv(args, header, rows, digest=None, path=None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf)          # RFC 4180: CRLF line ends, minimal quoting
    w.writerow(header)
    w.writerows(rows)
    path = path or args.out
    emit(args, buf.getvalue(), path)
    if path:
        # CSV has no room for a header block; the run configuration goes alongside
        write_atomic(str(path) + ".meta.json", dumps(envelope(args, {"csv": Path(path).name}, digest)))


def _fmt(args, default="json") -> str:
    if getattr(args, "format", None):
        return args.format
    if args.out and str(args.out).endswith(".csv"):
        return "csv"
    return default


# ---------------------------------------------------------------------------
# inputs

def _read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_state(path):
    d = _read_json(path)
    if "schema" in d:
        d = d["result"]
    return state_from_json(d)


def _resolver(states):
    table = {}
    for st in states:
        for row in state_rows(st):
            for x in row:
                table[(x.source["state"], json.dumps(x.source["coord"]))] = x

    def resolve(digest, coord):
        try:
            return table[(digest, json.dumps(coord))]
        except KeyError:
            raise UsageError(f"no loaded state provides {digest}:{coord}")
    return resolve


def load_matrix(path):
    """Matrix file: {"rows": [[real, ...], ...], "norm1": {...}, "norm2": {...},
    "states": ["state.json", ...]}; reals are "p/q" strings or ExactReal JSON,
    including {"state": digest, "coord": ...} references into the listed states."""
    d = _read_json(path)
    base = Path(path).parent
    states = [load_state(base / p) for p in d.get("states", [])]
    resolve = _resolver(states)
    rows = [[parse_exact(x, resolve) for x in r] for r in d["rows"]]
    m, n = len(rows), len(rows[0])
    n1 = norm_from_json(d["norm1"], n) if "norm1" in d else max_norm(n)
    n2 = norm_from_json(d["norm2"], m) if "norm2" in d else max_norm(m)
    digest = ",".join(st.digest for st in states) or None
    return ApproxProblem.of(rows, n1, n2), digest


def load_problem(args):
    """(problem, state or None, digest) from --matrix or --state."""
    if getattr(args, "matrix", None):
        prob, digest = load_matrix(args.matrix)
        return prob, None, digest
    if getattr(args, "state", None):
        st = load_state(args.state)
        return ApproxProblem.of(state_rows(st)), st, st.digest
    raise UsageError("one of --matrix or --state is required")


def _budget(args) -> int:
    return args.budget if args.budget is not None else default_budget()


# ---------------------------------------------------------------------------
# commands

def cmd_construct(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.kind == "two-scale":
            n = args.n if args.n is not None else Fraction(2)
            if n.denominator != 1:
                raise UsageError("two-scale needs an integer --n")
            st = build_two_scale(int(n), args.c if args.c is not None else Fraction(1, 2),
                                 seeds=args.seeds or (2, 4), levels=args.levels or 4)
        else:
            st = build_prime_power(args.n if args.n is not None else 4,
                                   args.c if args.c is not None else Fraction(1, 25),
                                   tau=args.tau, levels=args.levels or 3,
                                   seeds=args.seeds or (1, 1, 1, 1))
            if args.kind == "sign-varied":
                seed = args.sign_seed if args.sign_seed is not None else args.seed
                st = build_sign_varied(st, args.m, sign_seed=seed)
    bad = st.check()
    if bad:
        raise InvariantViolation("; ".join(bad))
    result = st.to_json()
    result["warnings"] = sorted({str(w.message) for w in caught})
    emit_json(args, result, st.digest, exact=True)
    return 0


def cmd_psi(args) -> int:
    prob, _, digest = load_problem(args)
    val, bhat, btil = psi_with_witness(prob, args.t, args.width, _budget(args))
    emit_json(args, {"t": rational_str(args.t), "psi": val.to_json(),
                     "b_hat": list(bhat), "b_tilde": list(btil)}, digest)
    return 0


def cmd_seq(args) -> int:
    from .bestapprox import best_approx_sequence
    prob, _, digest = load_problem(args)
    recs = best_approx_sequence(prob, args.cap, _budget(args))
    if _fmt(args, "csv") == "csv":
        k = prob.n + prob.m
        header = ["v"] + [f"b{i + 1}" for i in range(k)] + ["M_lo", "M_hi", "L_lo", "L_hi"]
        rows = []
        for r in recs:
            M, L = r.height.compact(), r.quality.compact()
            rows.append([r.index, *r.b, rational_str(M.lo), rational_str(M.hi),
                         rational_str(L.lo), rational_str(L.hi)])
        emit_csv(args, header, rows, digest)
    else:
        emit_json(args, {"cap": rational_str(args.cap), "records": [r.to_json() for r in recs]}, digest)
    return 0


def _plot_rows(recs, e):
    from .spectrum import _pow
    rows = []
    for r, nxt in zip(recs, list(recs[1:]) + [None]):
        ends = [r.height] + ([nxt.height] if nxt is not None else [])
        for t in ends:
            v = (r.quality * _pow(t, e)).compact()
            rows.append([r.index, rational_str(t.mid), rational_str(v.lo), rational_str(v.hi)])
    return rows


def cmd_spectrum(args) -> int:
    from .spectrum import classify_records, records_up_to, theta_estimate
    prob, st, digest = load_problem(args)
    e = args.exponent if args.exponent is not None else Fraction(prob.n, prob.m)
    recs, cap, clamped = records_up_to(prob, args.cap, _budget(args))
    if args.depth:
        recs = recs[:args.depth]
    min_h = args.min_height
    if min_h is None and isinstance(st, TwoScaleState):
        min_h = st.seeds[1]
    est = theta_estimate(recs, e, min_height=min_h)
    result = {"cap": rational_str(cap), "clamped": clamped, "estimate": est.to_json(),
              "records": [r.to_json() for r in recs]}
    if isinstance(st, (PrimePowerState, SignVariedState)):
        result["classification"] = classify_records(st, recs).to_json()
    emit_json(args, result, digest)
    if args.plot_csv:
        emit_csv(args, ["v", "t", "tpsi_lo", "tpsi_hi"], _plot_rows(recs, e), digest, args.plot_csv)
    return 0


def cmd_classify(args) -> int:
    from .spectrum import classify_records, records_up_to
    prob, st, digest = load_problem(args)
    if not isinstance(st, (PrimePowerState, SignVariedState)):
        raise UsageError("classify needs a prime-power or sign-varied --state")
    recs, cap, clamped = records_up_to(prob, args.cap, _budget(args))
    rep = classify_records(st, recs)
    emit_json(args, {"cap": rational_str(cap), "clamped": clamped, **rep.to_json()}, digest)
    return 0


def cmd_survive(args) -> int:
    from .bestapprox import best_approx_sequence
    from .spectrum import extension_survives, survival_levels, survival_sample
    st = load_state(args.state)
    if not isinstance(st, PrimePowerState):
        raise UsageError("survive needs a prime-power --state")
    xi = st.xi()
    n = int(st.exponent) if st.exponent.denominator == 1 else None
    if n is None or n < 3:
        raise UsageError("survival sampling needs an integer exponent n >= 3")
    recs = best_approx_sequence(ApproxProblem.of([xi]), args.cap, _budget(args))
    levels = list(args.v) if args.v else survival_levels(recs, args.T_max)
    reports, degenerate = [], []
    for v in levels:
        rep = survival_sample(xi, n, recs, v, args.trials, prng_seed=args.seed,
                              grid_bits=args.grid_bits, budget=_budget(args))
        reports.append(rep.to_json())
        gamma = (xi[0] + xi[1],) + (0,) * (n - 3)
        ok, wit = extension_survives(xi, gamma, rep.L_v, rep.T_v)
        degenerate.append({"v": v, "survives": ok,
                           "witness": None if wit is None else {"x": list(wit[0]), "y": wit[1]}})
    emit_json(args, {"levels": levels, "reports": reports, "degenerate": degenerate}, st.digest)
    return 0


def cmd_transfer(args) -> int:
    from .transference import calibrate, calibrated_C, verify_transference
    if args.calibrate:
        shapes = [tuple(int(x) for x in s.split(",")) for s in args.calibrate]
        table = {}
        for n, m in shapes:
            cal = calibrate(n, m, trials=args.trials, seed=args.seed, budget=_budget(args), jobs=args.jobs)
            table[f"{n},{m}"] = cal.to_json()
        emit_json(args, {"calibration": table})
        return 0
    if not (args.matrix and args.A is not None and args.B is not None):
        raise UsageError("transfer needs --matrix, --A and --B (or --calibrate)")
    prob, digest = load_matrix(args.matrix)
    if prob.rational_matrix() is None:
        raise UsageError("transfer needs a rational matrix")
    if args.C == "auto":
        C = calibrated_C(prob.n, prob.m)
    else:
        C = rational(args.C)
    res = verify_transference(prob, args.A, args.B, C, _budget(args))
    out = res.to_json()
    out["C_source"] = "calibrated (empirical, non-rigorous)" if args.C == "auto" else "user"
    emit_json(args, out, digest)
    return 0


def cmd_constants(args) -> int:
    ns = parse_range(args.cn)
    rows = []
    for n in ns:
        g, b = cn_threshold(n), cn_threshold_ball(n)
        gi, bi = g.interval, b.interval
        rows.append({"n": n, "gamma_form": g.to_json(), "ball_form": b.to_json(),
                     "forms_agree": cn_forms_agree(n),
                     "gamma_lo": gi.lo, "gamma_hi": gi.hi, "ball_lo": bi.lo, "ball_hi": bi.hi,
                     "symbolic": repr(g.symbolic)})
    if _fmt(args, "csv") == "csv":
        header = ["n", "gamma_lo", "gamma_hi", "ball_lo", "ball_hi", "forms_agree", "symbolic"]
        emit_csv(args, header, [[r["n"], f"{float(r['gamma_lo']):.17g}", f"{float(r['gamma_hi']):.17g}",
                                 f"{float(r['ball_lo']):.17g}", f"{float(r['ball_hi']):.17g}",
                                 r["forms_agree"], r["symbolic"]] for r in rows])
    else:
        emit_json(args, [{k: v for k, v in r.items() if not k.endswith(("_lo", "_hi"))} for r in rows])
    return 0


def cmd_probe(args) -> int:
    from .spectrum import PrecisionExhausted, integer_relation_probe
    prob, st, digest = load_problem(args)
    values = [x for row in prob.omega for x in row]
    try:
        res = integer_relation_probe(values, args.bound, bits=args.bits)
    except PrecisionExhausted as exc:
        # reported, not guessed: the known prefixes cannot separate this candidate from zero
        emit_json(args, {"kind": "precision-exhausted", "height_bound": args.bound, "detail": str(exc)}, digest)
        return EXIT_FAILURE
    emit_json(args, res.to_json(), digest)
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="PRNG seed (Philox key)")
    common.add_argument("--budget", type=int, default=None,
                        help="enumeration budget in candidate points (default: $DIRLAB_BUDGET or 10^8)")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes for trial-parallel sweeps")
    common.add_argument("--out", default=None, help="output path (default: stdout)")

    p = argparse.ArgumentParser(prog="dirichlet-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def source(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--matrix", help="matrix JSON file")
        g.add_argument("--state", help="construction state JSON file")

    sp = sub.add_parser("construct", parents=[common], help="build a construction state")
    sp.add_argument("--kind", required=True, choices=["two-scale", "prime-power", "sign-varied"])
    sp.add_argument("--n", type=rational, default=None, help="n (two-scale) or the exponent n/m")
    sp.add_argument("--c", type=rational, default=None, help="target Dirichlet constant")
    sp.add_argument("--levels", type=int, default=None)
    sp.add_argument("--seeds", type=int_list, default=None)
    sp.add_argument("--tau", type=rational, default=None)
    sp.add_argument("--m", type=int, default=2, help="rows of the sign-varied matrix")
    sp.add_argument("--sign-seed", type=int, default=None)
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("psi", parents=[common], help="certified psi(t)")
    source(sp)
    sp.add_argument("--t", type=rational, required=True)
    sp.add_argument("--width", type=rational, default=Fraction(1, 10 ** 12))
    sp.set_defaults(func=cmd_psi)

    sp = sub.add_parser("seq", parents=[common], help="best-approximation records", epilog=SEQ_CSV_HELP)
    source(sp)
    sp.add_argument("--cap", type=rational, required=True)
    sp.add_argument("--format", choices=["json", "csv"], default=None)
    sp.set_defaults(func=cmd_seq)

    sp = sub.add_parser("spectrum", parents=[common], help="window estimates of the Dirichlet constant",
                        epilog=PLOT_CSV_HELP)
    source(sp)
    sp.add_argument("--cap", type=rational, default=Fraction(200))
    sp.add_argument("--depth", type=int, default=None, help="use at most this many records")
    sp.add_argument("--min-height", type=rational, default=None)
    sp.add_argument("--exponent", type=rational, default=None)
    sp.add_argument("--plot-csv", default=None)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("classify", parents=[common], help="classify records of a prime-power state")
    source(sp)
    sp.add_argument("--cap", type=rational, default=Fraction(200))
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("survive", parents=[common], help="survival of random extensions")
    sp.add_argument("--state", required=True)
    sp.add_argument("--cap", type=rational, default=Fraction(60))
    sp.add_argument("--T-max", dest="T_max", type=rational, default=Fraction(30))
    sp.add_argument("--v", type=int_list, default=None, help="levels to test (default: all with T_v <= T-max)")
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--grid-bits", type=int, default=20)
    sp.set_defaults(func=cmd_survive)

    sp = sub.add_parser("transfer", parents=[common], help="primal/dual box implication")
    sp.add_argument("--matrix")
    sp.add_argument("--A", type=rational)
    sp.add_argument("--B", type=rational)
    sp.add_argument("--C", default="auto", help="rational constant or 'auto' (shipped calibration)")
    sp.add_argument("--calibrate", nargs="+", metavar="N,M", help="run the calibration sweep instead")
    sp.add_argument("--trials", type=int, default=200)
    sp.set_defaults(func=cmd_transfer)

    sp = sub.add_parser("constants", parents=[common], help="closed-form thresholds c_n",
                        epilog=CONSTANTS_CSV_HELP)
    sp.add_argument("--cn", required=True, help="range like 4..12")
    sp.add_argument("--format", choices=["json", "csv"], default=None)
    sp.set_defaults(func=cmd_constants)

    sp = sub.add_parser("probe-independence", parents=[common], help="search small integer relations")
    source(sp)
    sp.add_argument("--bound", type=int, default=10)
    sp.add_argument("--bits", type=int, default=96)
    sp.set_defaults(func=cmd_probe)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (BudgetExceeded, LevelBudgetExceeded, InsufficientLevels) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CertificationError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
