"""Exhaustive exact solvers for small instances.

These are the ground truth for every approximation test. Each one sizes its
enumeration first and raises :class:`BudgetExceeded` instead of truncating.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import BudgetExceeded, DomainError
from .instance import Clustering, pad
from .layered_ball import LayeredBallSolution
from .norms import evaluate

CHUNK = 1 << 15


@dataclass(frozen=True)
class OracleBudget:
    max_center_subsets: int = 10**6
    max_assignments: int = 10**7
    max_radius_vectors: int = 10**7

    def __post_init__(self):
        if min(self.max_center_subsets, self.max_assignments, self.max_radius_vectors) <= 0:
            raise DomainError("oracle caps must be positive")


DEFAULT_BUDGET = OracleBudget()


def center_subsets(F, k):
    for s in range(1, min(k, F) + 1):
        yield from itertools.combinations(range(F), s)


def count_subsets(F, k):
    return sum(math.comb(F, s) for s in range(1, min(k, F) + 1))


def _check(what, required, cap):
    if required > cap:
        raise BudgetExceeded(what, required, cap)


def exact_ncc(inst, f, g, budget=DEFAULT_BUDGET, nearest_only=False):
    """Optimal clustering over all center sets of size <= k and all assignments.

    Points may be assigned to any chosen center, not only the nearest one.
    With ``nearest_only`` the assignment is forced to :func:`nearest_assignment`.
    Returns ``(cost, Clustering)``; ties go to the first solution in enumeration
    order (subsets by size then lexicographically, assignments lexicographically).
    """
    n, F, k = inst.n, inst.num_facilities, inst.k
    if f.arity != n or g.arity != k:
        raise DomainError("norm arities must be n (inner) and k (outer)")
    _check("center subsets", count_subsets(F, k), budget.max_center_subsets)
    if not nearest_only:
        _check("assignments", sum(math.comb(F, s) * s**n for s in range(1, min(k, F) + 1)),
               budget.max_assignments)
    pf = inst.pf
    best_cost, best = math.inf, None
    for X in center_subsets(F, k):
        s = len(X)
        d = pf[:, list(X)]  # n x s
        if nearest_only:
            choices = np.argmin(d, axis=1)[None, :]
        else:
            choices = None
        for assign in _assignment_chunks(n, s) if choices is None else [choices]:
            onehot = assign[:, None, :] == np.arange(s)[None, :, None]  # A x s x n
            vectors = np.where(onehot, d.T[None, :, :], 0.0)
            inner = evaluate(f, vectors)  # A x s
            cost = evaluate(g, pad(inner, k))
            i = int(np.argmin(cost))
            if cost[i] < best_cost - 1e-12:
                best_cost = float(cost[i])
                best = Clustering(X, np.asarray(X)[assign[i]])
    return best_cost, best


def _assignment_chunks(n, s):
    """All maps from n points to s centers as integer arrays, in lexicographic order."""
    total = s**n
    # digits of 0..total-1 in base s, most significant first
    for start in range(0, total, CHUNK):
        codes = np.arange(start, min(total, start + CHUNK))
        digits = np.empty((len(codes), n), dtype=np.int64)
        for j in range(n - 1, -1, -1):
            digits[:, j] = codes % s
            codes = codes // s
        yield digits


def exact_mnkc(inst, f, budget=DEFAULT_BUDGET):
    """Cluster-oblivious optimum: min over center sets of f(distance to nearest center)."""
    n, F, k = inst.n, inst.num_facilities, inst.k
    if f.arity != n:
        raise DomainError("inner norm arity must be n")
    _check("center subsets", count_subsets(F, k), budget.max_center_subsets)
    best_cost, best = math.inf, None
    for X in center_subsets(F, k):
        c = float(evaluate(f, inst.pf[:, list(X)].min(axis=1)))
        if c < best_cost - 1e-12:
            best_cost, best = c, X
    return best_cost, best


def _subset_costs_unrestricted(lb, x, masks):
    """For every point subset (rows of ``masks``) the best radius vector at facility x."""
    d = lb.base.pf[:, x]
    n, m = lb.n, lb.m
    # candidate radii per layer: 0 or any point distance; cost is separable across layers
    cand = np.concatenate([[0.0], d])  # c
    over = np.maximum(d[None, :] - cand[:, None], 0.0)  # c x n
    excess = masks @ over.T  # S x c : sum over subset of (d - r)^+
    total = np.zeros(len(masks))
    radii = np.zeros((len(masks), m))
    for i in range(m):
        layer = lb.rho[i] * excess + lb.mu[i] * cand[None, :]
        j = np.argmin(layer, axis=1)
        total += layer[np.arange(len(masks)), j]
        radii[:, i] = cand[j]
    return total, radii


def _subset_costs_canonic(lb, x, masks, vectors):
    d = lb.base.pf[:, x]
    pen = np.maximum(d[:, None, None] - vectors[None, :, :], 0.0) @ lb.rho  # n x V
    total = masks @ pen + (vectors @ lb.mu)[None, :]
    j = np.argmin(total, axis=1)
    return total[np.arange(len(masks)), j], vectors[j]


def exact_lbkm(lb, budget=DEFAULT_BUDGET, candidates=None):
    """Exact layered-ball optimum by dynamic programming over point subsets.

    Unrestricted mode picks each layer's radius from 0 and the point distances,
    which is exact because the cost is convex and piecewise linear in each
    radius with breakpoints there. Passing ``candidates`` (a CandidateRadii)
    restricts every ball to those vectors and yields the canonic optimum.
    Returns ``(cost, LayeredBallSolution)``.
    """
    n, F, k = lb.n, lb.base.num_facilities, lb.k
    full = (1 << n) - 1
    states = F * (full + 1) * (n + 1 if candidates is None else max(1, len(candidates)))
    _check("facility-subset radius states", states, budget.max_radius_vectors)
    _check("subset transitions", F * 3**n * k, budget.max_assignments)
    if candidates is not None and len(candidates.vectors) == 0:
        raise DomainError("candidate radius set is empty")
    masks = ((np.arange(full + 1)[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    table, radii = [], []
    for x in range(F):
        if candidates is None:
            c, r = _subset_costs_unrestricted(lb, x, masks)
        else:
            c, r = _subset_costs_canonic(lb, x, masks, np.asarray(candidates.vectors))
        table.append(c)
        radii.append(r)

    INF = math.inf
    # dp[c][mask]: cheapest way to serve mask with c balls at distinct facilities among those seen
    dp = np.full((k + 1, full + 1), INF)
    dp[0, 0] = 0.0
    choice = []
    for x in range(F):
        new = dp.copy()
        took = {}
        for c in range(k):
            for mask in np.flatnonzero(np.isfinite(dp[c])):
                rest = full ^ int(mask)
                sub = rest
                base = dp[c, mask]
                while sub:
                    val = base + table[x][sub]
                    tgt = int(mask) | sub
                    if val < new[c + 1, tgt] - 1e-12:
                        new[c + 1, tgt] = val
                        took[(c + 1, tgt)] = (int(mask), sub)
                    sub = (sub - 1) & rest
        choice.append(took)
        dp = new
    c_best = int(np.argmin(dp[:, full]))
    best = float(dp[c_best, full])
    # walk the choices backwards
    sol, c, mask = {}, c_best, full
    for x in range(F - 1, -1, -1):
        step = choice[x].get((c, mask))
        if step is not None:
            prev, sub = step
            sol[x] = radii[x][sub]
            c, mask = c - 1, prev
    return best, LayeredBallSolution(sol)
