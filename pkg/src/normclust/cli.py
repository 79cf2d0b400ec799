"""Command-line interface: ``normclust {gen,solve,bench,attenuation}``.

Exit codes: 0 success, 2 bad input, 3 an enumeration cap was hit, 4 a
benchmark ratio exceeded its proven bound.

CSV output (``solve --out`` and ``bench``) uses fixed columns and prints
floats with 9 significant digits. ``bench`` columns are
``instance,algorithm,cost,oracle,ratio,bound,time``; ``bound`` is empty for
heuristic solvers and ``time`` is empty unless ``--timing`` is given, so that
repeated runs are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .exceptions import BudgetExceeded, ConfigurationError, DomainError
from .instance import euclidean_matrix, instance_from_json, load_instance
from .layered_ball import DEFAULT_RADII_CAP
from .meta import (
    SolverReport,
    clear_cache,
    solve_auto,
    solve_chif,
    solve_chig,
    solve_k_apx,
    solve_ord_l1,
    solve_sym_l1,
)
from .norms import NormSpec, attenuation, norm_from_json
from .oracle import OracleBudget, exact_ncc
from .primal_dual import trace_events

log = logging.getLogger("normclust")

ALGORITHMS = ("auto", "ord-l1", "sym-l1", "chig", "chif", "k-apx", "oracle")
BENCH_ALGORITHMS = ("chig", "chif", "k-apx", "auto")
BENCH_COLUMNS = ("instance", "algorithm", "cost", "oracle", "ratio", "bound", "time")
SOLVE_COLUMNS = ("instance", "algorithm", "cost", "chi_f", "chi_g", "bound", "time", "oracle", "ratio")


class UsageError(Exception):
    pass


def fmt(x):
    if x is None:
        return ""
    return f"{x:.9g}"


def parse_norm(text, arity):
    """Norm from JSON (``{"type": "top", "ell": 2}``) or shorthand (``top:2``, ``lp:3``, ``ordered:3,2,1``)."""
    text = text.strip()
    if text.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DomainError(f"bad norm JSON: {exc}") from None
        return norm_from_json(obj, arity)
    kind, _, arg = text.partition(":")
    kind = kind.lower()
    if kind in ("l1", "linf"):
        return norm_from_json({"type": kind}, arity)
    if kind == "lp":
        return norm_from_json({"type": "lp", "p": float(arg)}, arity)
    if kind == "top":
        return norm_from_json({"type": "top", "ell": int(arg)}, arity)
    if kind == "ordered":
        return norm_from_json({"type": "ordered", "weights": [float(v) for v in arg.split(",")]}, arity)
    raise DomainError(f"unknown norm {text!r}")


def _norm_arg(value, arity):
    if isinstance(value, dict):
        return norm_from_json(value, arity)
    return parse_norm(value, arity)


# -- gen ----------------------------------------------------------------------

def generate_instance(n, num_facilities, k, dim, seed):
    if n < 1 or num_facilities < 1 or dim < 1:
        raise UsageError("n, facilities and dim must be positive")
    if not 1 <= k <= num_facilities:
        raise UsageError("k must lie between 1 and the number of facilities")
    rng = np.random.default_rng(seed)
    coords = rng.random((n + num_facilities, dim))
    dist = euclidean_matrix(coords)
    return {
        "points": [f"p{i}" for i in range(n)],
        "facilities": [f"f{i}" for i in range(num_facilities)],
        "k": k,
        "metric": {"type": "matrix", "values": dist.tolist()},
    }


def cmd_gen(args, out):
    obj = generate_instance(args.n, args.facilities, args.k, args.dim, args.seed)
    text = json.dumps(obj) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        out.write(text)
    return 0


# -- solve --------------------------------------------------------------------

def run_algorithm(alg, inst, f, g, cap, budget=None, seed=0):
    if alg == "auto":
        return solve_auto(inst, f, g, cap=cap, seed=seed)
    if alg == "ord-l1":
        return solve_ord_l1(inst, f, g, cap=cap)
    if alg == "sym-l1":
        return solve_sym_l1(inst, f, g, cap=cap, seed=seed)
    if alg == "chig":
        return solve_chig(inst, f, g, cap=cap, seed=seed)
    if alg == "chif":
        return solve_chif(inst, f, g)
    if alg == "k-apx":
        return solve_k_apx(inst, f, g)
    if alg == "oracle":
        cost, cl = exact_ncc(inst, f, g, budget or OracleBudget())
        return SolverReport(cl, cost, "oracle", 1.0, ["exhaustive"])
    raise UsageError(f"unknown algorithm {alg!r}")


def _load(path, k=None):
    inst = load_instance(path)
    if k is not None:
        inst = inst.with_k(k)
    return inst


def cmd_solve(args, out):
    inst = _load(args.instance, args.k)
    f = parse_norm(args.inner, inst.n)
    g = parse_norm(args.outer, inst.k)
    budget = OracleBudget(max_assignments=args.cap) if args.cap else OracleBudget()
    cap = args.cap or DEFAULT_RADII_CAP
    t0 = time.perf_counter()
    if args.trace:
        clear_cache()  # a cached result would skip the ascent and leave the trace empty
        with open(args.trace, "w", newline="") as fh, trace_events(fh):
            rep = run_algorithm(args.alg, inst, f, g, cap, budget, args.seed)
    else:
        rep = run_algorithm(args.alg, inst, f, g, cap, budget, args.seed)
    elapsed = time.perf_counter() - t0
    oracle = ratio = None
    if args.oracle:
        oracle = exact_ncc(inst, f, g, budget)[0]
        ratio = _ratio(rep.cost, oracle)
    row = {
        "instance": Path(args.instance).name,
        "algorithm": rep.algorithm,
        "cost": fmt(rep.cost),
        "chi_f": fmt(rep.chi_f),
        "chi_g": fmt(rep.chi_g),
        "bound": fmt(rep.proven_factor) if rep.proven_factor is not None else "heuristic",
        "time": f"{elapsed:.3f}",
        "oracle": fmt(oracle),
        "ratio": fmt(ratio),
    }
    cols = SOLVE_COLUMNS if args.oracle else SOLVE_COLUMNS[:7]
    width = max(len(c) for c in cols)
    for c in cols:
        out.write(f"{c:<{width}}  {row[c]}\n")
    out.write(f"{'centers':<{width}}  {' '.join(map(str, rep.solution.center_ids(inst)))}\n")
    for note in rep.notes:
        log.info("%s", note)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            w.writerow([row[c] for c in cols])
    return 0


def _ratio(cost, opt):
    if opt > 0:
        return cost / opt
    return 1.0 if cost <= 1e-12 else float("inf")


# -- bench --------------------------------------------------------------------

DEFAULT_SOLVERS = {
    "chig": lambda inst, f, g: solve_chig(inst, f, g),
    "chif": lambda inst, f, g: solve_chif(inst, f, g),
    "k-apx": lambda inst, f, g: solve_k_apx(inst, f, g),
    "auto": lambda inst, f, g: solve_auto(inst, f, g),
}


def _corpus(args):
    items = []
    if args.corpus:
        folder = Path(args.corpus)
        if not folder.is_dir():
            raise UsageError(f"corpus directory {folder} does not exist")
        for path in sorted(folder.glob("*.json")):
            raw = json.loads(path.read_text())
            inst = load_instance(path)
            f = _norm_arg(raw.get("inner", "l1"), inst.n)
            g = _norm_arg(raw.get("outer", "l1"), inst.k)
            items.append((path.stem, inst, f, g))
    for seed in range(args.seeds):
        obj = generate_instance(args.n, args.facilities, args.k, 2, seed)
        inst = instance_from_json(obj)
        items.append((f"seed{seed}", inst, NormSpec.l1(inst.n), NormSpec.l1(inst.k)))
    return items


def cmd_bench(args, out, solvers=None):
    solvers = solvers or DEFAULT_SOLVERS
    algs = args.alg.split(",") if args.alg else [a for a in BENCH_ALGORITHMS if a in solvers]
    for a in algs:
        if a not in solvers:
            raise UsageError(f"unknown bench algorithm {a!r}")
    items = _corpus(args)
    budget = OracleBudget()

    def work(item):
        name, inst, f, g = item
        opt = exact_ncc(inst, f, g, budget)[0]
        rows = []
        for a in algs:
            t0 = time.perf_counter()
            rep = solvers[a](inst, f, g)
            elapsed = time.perf_counter() - t0
            rows.append((name, a, rep.cost, opt, _ratio(rep.cost, opt), rep.proven_factor, elapsed))
        return rows

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(work, items))

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    violations = []
    worst = {a: None for a in algs}
    for rows in results:
        for name, a, cost, opt, ratio, bound, elapsed in rows:
            w.writerow([name, a, fmt(cost), fmt(opt), fmt(ratio), fmt(bound),
                        f"{elapsed:.3f}" if args.timing else ""])
            if bound is not None and ratio > bound * (1 + 1e-9):
                violations.append(f"{name}/{a}: ratio {ratio:.6g} exceeds bound {bound:.6g}")
            worst[a] = ratio if worst[a] is None else max(worst[a], ratio)
    if results:
        for a in algs:
            w.writerow(["summary", a, "", "", fmt(worst[a]), "", ""])
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    else:
        out.write(text)
    for v in violations:
        log.error("bound violation: %s", v)
    return 4 if violations else 0


# -- attenuation ----------------------------------------------------------------

def cmd_attenuation(args, out):
    norm = parse_norm(args.norm, args.d)
    out.write(f"{attenuation(norm):.6f}\n")
    return 0


# -- entry point ----------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="normclust", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true", help="print diagnostics to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="random Euclidean instance in the unit cube")
    g.add_argument("--n", type=int, required=True, help="number of points")
    g.add_argument("--facilities", "-f", type=int, required=True, help="number of facilities")
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output file (default stdout)")

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("instance", help="instance JSON file")
    s.add_argument("--alg", choices=ALGORITHMS, default="auto")
    s.add_argument("--inner", default="l1", help="inner norm f as JSON or shorthand (l1, linf, lp:P, top:L, ordered:w1,w2,..)")
    s.add_argument("--outer", default="l1", help="outer norm g, same syntax")
    s.add_argument("--k", type=int, help="override the instance budget k")
    s.add_argument("--seed", type=int, default=0, help="seed for the surrogate distortion sample")
    s.add_argument("--oracle", action="store_true", help="also compute the exact optimum and the ratio")
    s.add_argument("--out", help="write a CSV row with columns " + ",".join(SOLVE_COLUMNS))
    s.add_argument("--cap", type=int, help="enumeration cap for radius vectors and oracle assignments")
    s.add_argument("--trace", help="write dual-ascent events as CSV to this file")

    b = sub.add_parser("bench", help="compare solvers against the exact optimum",
                       description="CSV columns: " + ",".join(BENCH_COLUMNS)
                       + ". One row per (instance, algorithm) plus a summary row per algorithm holding the max ratio.")
    b.add_argument("corpus", nargs="?", help="directory of instance JSON files (optional 'inner'/'outer' keys)")
    b.add_argument("--seeds", type=int, default=0, help="also bench this many generated instances")
    b.add_argument("--n", type=int, default=5, help="points per generated instance")
    b.add_argument("--facilities", type=int, default=4, help="facilities per generated instance")
    b.add_argument("--k", type=int, default=2, help="budget of generated instances")
    b.add_argument("--alg", help="comma-separated subset of " + ",".join(BENCH_ALGORITHMS))
    b.add_argument("--out", help="output CSV (default stdout)")
    b.add_argument("--timing", action="store_true", help="fill the time column")
    b.add_argument("--workers", type=int, default=2)

    a = sub.add_parser("attenuation", help="print the attenuation of a norm")
    a.add_argument("--norm", required=True, help="norm as JSON or shorthand")
    a.add_argument("--d", type=int, required=True, help="dimension")
    return p


def main(argv=None, solvers=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("normclust: %(message)s"))
    pkg_log = logging.getLogger("normclust")
    previous_level = pkg_log.level
    pkg_log.addHandler(handler)
    pkg_log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "gen":
            return cmd_gen(args, out)
        if args.command == "solve":
            return cmd_solve(args, out)
        if args.command == "bench":
            return cmd_bench(args, out, solvers)
        return cmd_attenuation(args, out)
    except BudgetExceeded as exc:
        log.error("%s", exc)
        return 3
    except (UsageError, DomainError, ConfigurationError, ValueError, KeyError, OSError) as exc:
        log.error("%s", exc)
        return 2
    finally:
        pkg_log.removeHandler(handler)
        pkg_log.setLevel(previous_level)


if __name__ == "__main__":
    sys.exit(main())
