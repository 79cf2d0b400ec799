"""Top-level solvers for clustering under an inner norm f and an outer norm g.

* ``solve_ord_l1`` / ``solve_sym_l1``: the layered-ball pipeline, for ordered
  inner norms directly and for other symmetric norms through an ordered
  surrogate.
* ``solve_chig``: the symmetric pipeline scored under the real outer norm,
  good when g is close to L1.
* ``solve_chif``: a pluggable solver for an L-infinity inner norm, good when f
  is close to L-infinity.
* ``solve_k_apx``: a cluster-oblivious solution from a pluggable min-norm
  k-clustering solver with nearest assignment.
* ``solve_auto``: the cheapest of the last three.
"""
from __future__ import annotations

import itertools
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bipoint import lbkm_factor, solve_lbkm
from .exceptions import ConfigurationError, DomainError, NormClustError
from .instance import Clustering, nearest_assignment, solution_cost
from .layered_ball import DEFAULT_RADII_CAP, lb_solution_to_clustering, reduce_ord_l1
from .norms import NormSpec, attenuation, evaluate, ordered_surrogate, ordered_weights

EXHAUSTIVE_MNKC_LIMIT = 200_000


@dataclass
class SolverReport:
    solution: Clustering
    cost: float
    algorithm: str
    proven_factor: Optional[float]
    notes: list = field(default_factory=list)
    chi_f: Optional[float] = None
    chi_g: Optional[float] = None

    @property
    def heuristic(self):
        return self.proven_factor is None


@dataclass(frozen=True)
class SubroutineResult:
    """Centers chosen by a pluggable subroutine and its approximation factor (None if unproven)."""

    centers: tuple
    factor: Optional[float] = None
    note: str = ""


@dataclass
class SubroutineRegistry:
    """Pluggable subroutines.

    ``mnkc_solver(inst, f)`` picks at most k centers for the cluster-oblivious
    objective ``f(distance to nearest center)``. ``linf_sym_solver(inst, g)``
    returns a Clustering for the L-infinity inner norm under outer norm g.
    Either may return a :class:`SubroutineResult`; a bare center tuple or
    Clustering counts as unproven unless the matching ``*_factor`` is set.
    """

    mnkc_solver: Optional[Callable] = None
    linf_sym_solver: Optional[Callable] = None
    mnkc_factor: Optional[float] = None
    linf_sym_factor: Optional[float] = None

    @classmethod
    def default(cls):
        return cls(mnkc_solver=default_mnkc, linf_sym_solver=farthest_first_linf)


def outer_penalty(g):
    """``k^(1 - attenuation(g))``: what ignoring the outer norm can cost."""
    return 1.0 if g.arity == 1 else g.arity ** (1 - attenuation(g))


def inner_penalty(f):
    """``n^attenuation(f)``: what replacing the inner norm by L-infinity can cost."""
    return 1.0 if f.arity == 1 else f.arity ** attenuation(f)


def _chi(norm):
    return None if norm.arity < 2 else attenuation(norm)


# -- layered-ball pipeline with a result cache --------------------------------

_cache_lock = threading.Lock()
_lbkm_cache: dict = {}
CACHE_SIZE = 256


def _cached_lbkm(lb, cap):
    key = (lb.base.pf.tobytes(), lb.base.pf.shape, lb.k, lb.rho.tobytes(), lb.mu.tobytes(), cap)
    with _cache_lock:
        hit = _lbkm_cache.get(key)
    if hit is not None:
        return hit
    sol = solve_lbkm(lb, cap=cap)
    with _cache_lock:
        if len(_lbkm_cache) >= CACHE_SIZE:
            _lbkm_cache.pop(next(iter(_lbkm_cache)))
        _lbkm_cache[key] = sol
    return sol


def clear_cache():
    with _cache_lock:
        _lbkm_cache.clear()


def _report(inst, cl, f, g, algorithm, factor, notes):
    return SolverReport(cl, solution_cost(inst, cl, f, g), algorithm, factor, list(notes), _chi(f), _chi(g))


def _inner(inst, f):
    return f if f.kind == "oracle" else f.with_arity(inst.n)


def _outer(inst, g):
    return NormSpec.l1(inst.k) if g is None else g.with_arity(inst.k)


def solve_ord_l1(inst, w, g=None, cap=DEFAULT_RADII_CAP):
    """Layered-ball pipeline for an ordered inner norm with weights ``w``.

    ``w`` may be a weight vector or an ordered-representable NormSpec. The
    factor is proven for g = L1; for another outer norm it is multiplied by
    ``k^(1 - attenuation(g))``.
    """
    if isinstance(w, NormSpec):
        weights = ordered_weights(w.with_arity(inst.n) if w.kind != "oracle" else w)
        if weights is None:
            raise DomainError(f"{w!r} is not an ordered norm")
    else:
        weights = np.asarray(w, dtype=float)
    f = NormSpec.ordered(weights)
    if f.arity != inst.n:
        raise DomainError(f"ordered weights must have length n={inst.n}")
    g = _outer(inst, g)
    lb = reduce_ord_l1(inst, weights)
    cl = lb_solution_to_clustering(lb, _cached_lbkm(lb, cap))
    factor = lbkm_factor(inst.n) * outer_penalty(g)
    return _report(inst, cl, f, g, "ord-l1", factor, [])


def solve_sym_l1(inst, f, g=None, cap=DEFAULT_RADII_CAP, seed=0):
    """Ordered surrogate of f, then the ordered pipeline; cost is reported under f itself.

    ``seed`` drives the random sample used to measure the surrogate distortion
    when f is not itself ordered.
    """
    f = _inner(inst, f)
    sur = ordered_surrogate(f, seed=seed)
    rep = solve_ord_l1(inst, sur.weights, g, cap=cap)
    g = _outer(inst, g)
    notes = []
    if sur.distortion_bound > 1:
        notes.append(f"surrogate distortion {sur.distortion_bound:.6g} measured on a sample, not proven")
    return _report(inst, rep.solution, f, g, "sym-l1", rep.proven_factor * sur.distortion_bound, notes)


def solve_chig(inst, f, g, registry=None, cap=DEFAULT_RADII_CAP, seed=0):
    """Ignore g while optimising, then score under (f, g)."""
    rep = solve_sym_l1(inst, f, None, cap=cap, seed=seed)
    g = _outer(inst, g)
    factor = rep.proven_factor * outer_penalty(g)
    return _report(inst, rep.solution, _inner(inst, f), g, "chig", factor, rep.notes)


def _unpack(result, declared):
    if isinstance(result, SubroutineResult):
        factor = result.factor if result.factor is not None else declared
        return result.centers, factor, result.note
    return result, declared, ""


def solve_chif(inst, f, g, registry=None):
    """Ignore f while optimising (L-infinity inside), then score under (f, g)."""
    registry = registry or SubroutineRegistry.default()
    if registry.linf_sym_solver is None:
        raise ConfigurationError("no L-infinity inner-norm solver registered")
    f, g = _inner(inst, f), _outer(inst, g)
    out, factor, note = _unpack(registry.linf_sym_solver(inst, g), registry.linf_sym_factor)
    cl = out if isinstance(out, Clustering) else nearest_assignment(inst, out)
    _check_centers(inst, cl.centers)
    notes = [note] if note else []
    if factor is None:
        notes.append("heuristic stand-in, no proven factor")
        proven = None
    else:
        proven = factor * inner_penalty(f)
    return _report(inst, cl, f, g, "chif", proven, notes)


def solve_k_apx(inst, f, g, registry=None):
    """Cluster-oblivious centers, nearest assignment."""
    registry = registry or SubroutineRegistry.default()
    if registry.mnkc_solver is None:
        raise ConfigurationError("no min-norm k-clustering solver registered")
    f, g = _inner(inst, f), _outer(inst, g)
    X, factor, note = _unpack(registry.mnkc_solver(inst, f), registry.mnkc_factor)
    _check_centers(inst, X)
    cl = nearest_assignment(inst, X)
    notes = [note] if note else []
    if factor is None:
        notes.append("heuristic stand-in, no proven factor")
        proven = None
    else:
        proven = factor * inst.k
    return _report(inst, cl, f, g, "k-apx", proven, notes)


def _check_centers(inst, X):
    X = tuple(X)
    if not X or len(set(X)) > inst.k:
        raise NormClustError(f"subroutine returned {len(set(X))} centers for k={inst.k}")


def solve_auto(inst, f, g, registry=None, cap=DEFAULT_RADII_CAP, parallel=True, seed=0):
    """Run the three regime solvers and keep the cheapest result."""
    registry = registry or SubroutineRegistry.default()
    jobs = [
        ("chig", lambda: solve_chig(inst, f, g, registry, cap=cap, seed=seed)),
        ("chif", lambda: solve_chif(inst, f, g, registry)),
        ("k-apx", lambda: solve_k_apx(inst, f, g, registry)),
    ]
    results, errors = [], []
    if parallel:
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            futures = [(name, pool.submit(job)) for name, job in jobs]
            outcomes = []
            for name, fut in futures:
                try:
                    outcomes.append((name, fut.result(), None))
                except Exception as exc:  # collected and reported together below
                    outcomes.append((name, None, exc))
    else:
        outcomes = []
        for name, job in jobs:
            try:
                outcomes.append((name, job(), None))
            except Exception as exc:
                outcomes.append((name, None, exc))
    for name, rep, exc in outcomes:
        if exc is None:
            results.append(rep)
        else:
            errors.append(f"{name}: {exc}")
    if not results:
        raise NormClustError("all solvers failed: " + "; ".join(errors))
    best = min(results, key=lambda r: r.cost)  # first minimum wins, so ties keep job order
    factors = [r.proven_factor for r in results if r.proven_factor is not None]
    notes = [f"{r.algorithm} cost {r.cost:.9g}" for r in results] + errors
    rep = SolverReport(best.solution, best.cost, f"auto:{best.algorithm}",
                       min(factors) if factors else None, notes + best.notes, best.chi_f, best.chi_g)
    return rep


# -- default subroutines ------------------------------------------------------

def default_mnkc(inst, f):
    """Exhaustive search when small enough (exact), otherwise single-swap local search."""
    F, k = inst.num_facilities, inst.k
    if math.comb(F, k) <= EXHAUSTIVE_MNKC_LIMIT:
        best, best_cost = None, math.inf
        for X in itertools.combinations(range(F), k):
            c = float(evaluate(f, inst.pf[:, list(X)].min(axis=1)))
            if c < best_cost - 1e-12:
                best, best_cost = X, c
        return SubroutineResult(best, 1.0, "exhaustive min-norm k-clustering")
    return SubroutineResult(local_search_mnkc(inst, f), None, "single-swap local search")


def local_search_mnkc(inst, f, max_rounds=1000):
    F, k = inst.num_facilities, inst.k
    value = lambda X: float(evaluate(f, inst.pf[:, sorted(X)].min(axis=1)))
    # greedy start
    X = []
    for _ in range(k):
        X.append(min((x for x in range(F) if x not in X), key=lambda x: (value(X + [x]), x)))
    cur = value(X)
    for _ in range(max_rounds):
        improved = False
        for i, y in itertools.product(range(k), range(F)):
            if y in X:
                continue
            cand = X[:i] + [y] + X[i + 1:]
            c = value(cand)
            if c < cur * (1 - 1e-9) - 1e-12:
                X, cur, improved = cand, c, True
                break
        if not improved:
            break
    return tuple(sorted(X))


def farthest_first_linf(inst, g):
    """Farthest-first traversal over the points, each pick mapped to its nearest facility."""
    n = inst.n
    pp = inst.dist[:n, :n]
    picked = [0]
    gap = pp[0].copy()
    while len(picked) < min(inst.k, n):
        nxt = int(np.argmax(gap))
        if gap[nxt] <= 0:
            break
        picked.append(nxt)
        gap = np.minimum(gap, pp[nxt])
    centers = sorted({int(np.argmin(inst.pf[p])) for p in picked})
    return SubroutineResult(tuple(centers), None, "farthest-first traversal")
