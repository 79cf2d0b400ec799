"""From facility location back to k balls.

A binary search over the opening cost finds two LMP solutions, one with at
most k balls and one with more. Their convex combination is then rounded to a
feasible solution: every ball of the larger solution is grouped with its
cheapest-to-reach ball of the smaller one, and a fractional knapsack decides
group by group which side to open.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import BudgetExceeded, DomainError
from .layered_ball import (
    DEFAULT_RADII_CAP,
    LayeredBallSolution,
    enumerate_radii,
    guess_pairs,
    lb_cost,
    sparsify,
    unsparsify_solution,
)
from .primal_dual import FacilityLocationInput, lmp_solve

log = logging.getLogger(__name__)

MAX_BISECTIONS = 200


def lmp_factor(n):
    return 2 * math.log2(n) + 3


@dataclass(eq=False)
class BiPoint:
    """Two solutions with ``|X1| <= k < |X2|`` and weights ``a, b`` mixing to k.

    When a probe hits exactly k balls, ``sol2`` is ``None`` and ``b = 0``.
    """

    sol1: LayeredBallSolution
    sol2: Optional[LayeredBallSolution]
    a: float
    b: float
    k: int
    lam1: float = 0.0
    lam2: float = 0.0
    probes: int = 0
    dual_bound: float = 0.0

    @classmethod
    def from_solutions(cls, sol1, sol2, k, **kw):
        n1, n2 = len(sol1), len(sol2)
        if not n1 <= k < n2:
            raise DomainError(f"bi-point needs |X1| <= k < |X2|, got {n1}, {k}, {n2}")
        a = (n2 - k) / (n2 - n1)
        return cls(sol1, sol2, a, (k - n1) / (n2 - n1), k, **kw)

    @classmethod
    def single(cls, sol, k, **kw):
        return cls(sol, None, 1.0, 0.0, k, **kw)

    def combined_cost(self, lb):
        total = self.a * lb_cost(lb, self.sol1)
        if self.sol2 is not None and self.b > 0:
            total += self.b * lb_cost(lb, self.sol2)
        return total


def _best_single_ball(lb, sol):
    """Keep the one ball of ``sol`` whose solution alone is cheapest."""
    best = None
    for x in sol.centers:
        cand = LayeredBallSolution({x: sol.radii[x]})
        c = lb_cost(lb, cand)
        if best is None or c < best[0] - 1e-12:
            best = (c, cand)
    return best[1]


def _pad_zero_balls(lb, sol, target):
    """Add zero-radius balls greedily (largest cost drop, lowest index) up to ``target`` balls."""
    radii = dict(sol.radii)
    zero = np.zeros(lb.m)
    F = lb.base.num_facilities
    while len(radii) < target:
        best = None
        for x in range(F):
            if x in radii:
                continue
            c = lb_cost(lb, LayeredBallSolution({**radii, x: zero}))
            if best is None or c < best[0] - 1e-12:
                best = (c, x)
        if best is None:
            break
        radii[best[1]] = zero
    return LayeredBallSolution(radii)


def binary_search(lb, Delta, Gamma, radii=None, cap=DEFAULT_RADII_CAP):
    """Bisect the opening cost until the two bracketing LMP solutions are close."""
    n, k = lb.n, lb.k
    pf = lb.base.pf
    if radii is None:
        radii = enumerate_radii(n, lb.m, lb.mu, Delta, Gamma, cap=cap)
    d_max = float(pf.max())
    positive = pf[pf > 0]
    if d_max == 0 or len(positive) == 0:
        return BiPoint.single(LayeredBallSolution({0: np.zeros(lb.m)}), k)
    d_min = float(positive.min())
    eps = d_min / (lmp_factor(max(n, 2)) * lb.base.num_facilities)

    base = FacilityLocationInput(lb, 0.0, radii)
    dual_bound = 0.0
    probes = 0

    def probe(lam):
        nonlocal dual_bound, probes
        probes += 1
        out = lmp_solve(base.with_lambda(lam))
        # weak duality: sum(alpha) - k*lambda never exceeds the canonic optimum
        dual_bound = max(dual_bound, float(out.duals.alpha.sum()) - k * lam)
        return out.q

    hi = n * d_max * max(1.0, float(lb.rho.sum()))
    sol_hi = probe(hi)
    if len(sol_hi) == k:
        return BiPoint.single(sol_hi, k, lam1=hi, probes=probes, dual_bound=dual_bound)
    if len(sol_hi) > k:
        sol_hi = _best_single_ball(lb, sol_hi)

    lo = 0.0
    sol_lo = probe(lo)
    if len(sol_lo) == k:
        return BiPoint.single(sol_lo, k, lam1=lo, probes=probes, dual_bound=dual_bound)
    if len(sol_lo) < k:
        if k >= lb.base.num_facilities:
            # no solution can exceed k balls; the padded free-opening solution is already feasible
            return BiPoint.single(_pad_zero_balls(lb, sol_lo, k), k, lam1=lo, probes=probes,
                                  dual_bound=dual_bound)
        sol_lo = _pad_zero_balls(lb, sol_lo, k + 1)

    for _ in range(MAX_BISECTIONS):
        if hi - lo <= eps:
            break
        mid = 0.5 * (lo + hi)
        sol = probe(mid)
        if len(sol) == k:
            return BiPoint.single(sol, k, lam1=mid, probes=probes, dual_bound=dual_bound)
        if len(sol) < k:
            hi, sol_hi = mid, sol
        else:
            lo, sol_lo = mid, sol
    else:
        raise RuntimeError("binary search on the opening cost did not converge")
    return BiPoint.from_solutions(sol_hi, sol_lo, k, lam1=hi, lam2=lo, probes=probes, dual_bound=dual_bound)


# -- grouping ---------------------------------------------------------------

@dataclass(eq=False)
class GroupStructure:
    """Grouping of the larger solution's balls around the smaller solution's balls.

    Indices refer to positions in ``X1`` / ``X2`` (tuples of facility indices).
    ``cl1_fac[j]`` is the X1 position nearest to X2 ball ``j``; ``cl1_pt`` and
    ``cl2_pt`` map every point to its nearest X1 / X2 position.
    """

    X1: tuple
    X2: tuple
    R1: np.ndarray
    R2: np.ndarray
    cl1_fac: np.ndarray
    cl1_pt: np.ndarray
    cl2_pt: np.ndarray
    groups: list
    S: np.ndarray
    M: np.ndarray
    R1_inflated: np.ndarray
    d1_pt: np.ndarray
    d2_pt: np.ndarray
    savings: np.ndarray = field(default=None)

    def clients(self, i):
        """Points whose nearest X2 ball lies in group ``i``."""
        return np.flatnonzero(np.isin(self.cl2_pt, self.groups[i]))

    @property
    def weights(self):
        return np.array([len(g) - 1 for g in self.groups])


def _argmin_ties(cost, dist, tol=1e-9):
    """Row-wise argmin of ``cost``; near-ties go to smaller ``dist``, then smaller column."""
    best = cost.min(axis=1, keepdims=True)
    near = cost <= best + tol * np.maximum(1.0, np.abs(best))
    masked = np.where(near, dist, np.inf)
    dbest = masked.min(axis=1, keepdims=True)
    return np.argmax(near & (masked <= dbest), axis=1)


def build_groups(bi, lb):
    if bi.sol2 is None:
        raise DomainError("grouping needs two solutions")
    rho, mu = lb.rho, lb.mu
    pf, ff = lb.base.pf, lb.base.ff
    X1, X2 = bi.sol1.centers, bi.sol2.centers
    R1, R2 = bi.sol1.radius_matrix(), bi.sol2.radius_matrix()
    i1, i2 = list(X1), list(X2)

    # ball-to-ball cost between X1 and X2
    d12 = ff[np.ix_(i1, i2)]
    c12 = np.maximum(d12[:, :, None] - (R1[:, None, :] + R2[None, :, :]), 0.0) @ rho
    cl1_fac = _argmin_ties(c12.T, d12.T)
    d1 = pf[:, i1]
    c1 = np.maximum(d1[:, :, None] - R1[None, :, :], 0.0) @ rho
    cl1_pt = _argmin_ties(c1, d1)
    d2 = pf[:, i2]
    c2 = np.maximum(d2[:, :, None] - R2[None, :, :], 0.0) @ rho
    cl2_pt = _argmin_ties(c2, d2)

    groups = [np.flatnonzero(cl1_fac == i) for i in range(len(X1))]
    S = np.array([R2[g].sum(axis=0) if len(g) else np.zeros(lb.m) for g in groups])
    M = np.array([R2[g].max(axis=0) if len(g) else np.zeros(lb.m) for g in groups])
    rows = np.arange(len(pf))
    gs = GroupStructure(
        X1=X1, X2=X2, R1=R1, R2=R2,
        cl1_fac=cl1_fac, cl1_pt=cl1_pt, cl2_pt=cl2_pt,
        groups=groups, S=S, M=M, R1_inflated=R1 + 2 * M,
        d1_pt=c1[rows, cl1_pt], d2_pt=c2[rows, cl2_pt],
    )
    group_of_pt = cl1_fac[cl2_pt]
    detour = np.bincount(group_of_pt, weights=gs.d1_pt + gs.d2_pt, minlength=len(X1))
    gs.savings = R1 @ mu + S @ mu + detour
    return gs


# -- knapsack LP --------------------------------------------------------------

@dataclass(eq=False)
class KnapsackLpSolution:
    u: np.ndarray
    value: float
    special: Optional[int]


def solve_knapsack_lp(savings, weights, budget):
    """Maximise ``savings . u`` subject to ``weights . u <= budget`` and ``0 <= u <= 1``.

    Items of non-positive weight are taken outright (a negative weight frees
    budget). The rest are taken greedily by saving per unit weight, so at most
    one variable ends fractional.
    """
    savings = np.asarray(savings, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if budget < 0:
        raise DomainError(f"knapsack budget is negative ({budget}); the instance is infeasible")
    u = np.zeros(len(savings))
    free = weights <= 0
    u[free] = 1.0
    room = float(budget - weights[free].sum())
    paid = np.flatnonzero(~free)
    order = paid[np.lexsort((paid, -(savings[paid] / weights[paid])))]
    special = None
    for i in order:
        if room <= 0:
            break
        if weights[i] <= room + 1e-12:
            u[i] = 1.0
            room -= weights[i]
        else:
            u[i] = room / weights[i]
            special = int(i)
            room = 0.0
    return KnapsackLpSolution(u, float(savings @ u), special)


def special_extra_count(u, size):
    """Facilities opened from the special group besides its X1 centre."""
    return max(0, math.ceil(u * size - 1e-9) - 2)


def _merge(balls):
    """Union of (facility, radius) pairs; a facility opened twice keeps the coordinate-wise max."""
    out = {}
    for x, r in balls:
        r = np.asarray(r, dtype=float)
        out[x] = r if x not in out else np.maximum(out[x], r)
    return out


@dataclass(eq=False)
class RoundingResult:
    solution: LayeredBallSolution
    groups: Optional[GroupStructure] = None
    knapsack: Optional[KnapsackLpSolution] = None
    used_sol1: bool = False


def round_bipoint(bi, lb, seed=None):
    """Feasible k-ball solution from a bi-point. See :func:`round_bipoint_detailed`."""
    return round_bipoint_detailed(bi, lb, seed=seed).solution


def round_bipoint_detailed(bi, lb, seed=None):
    """Round a bi-point; ``seed`` switches the special group to a random subset."""
    k = bi.k
    if bi.sol2 is None or bi.b == 0 or bi.a > 0.5 or lb_cost(lb, bi.sol1) <= lb_cost(lb, bi.sol2):
        return RoundingResult(bi.sol1, used_sol1=True)
    gs = build_groups(bi, lb)
    ks = solve_knapsack_lp(gs.savings, gs.weights, k - len(gs.X1))
    balls = []
    for i, x in enumerate(gs.X1):
        if i == ks.special:
            continue
        if ks.u[i] >= 1.0:
            balls += [(gs.X2[j], gs.R2[j]) for j in gs.groups[i]]
        else:
            balls.append((x, gs.R1_inflated[i]))
    if ks.special is not None:
        i = ks.special
        balls.append((gs.X1[i], gs.R1_inflated[i]))
        extra = special_extra_count(ks.u[i], len(gs.groups[i]))
        pool = list(gs.groups[i])
        if seed is not None:
            rng = np.random.default_rng(seed)
            chosen = rng.choice(pool, size=extra, replace=False).tolist() if extra else []
            balls += [(gs.X2[j], gs.R2[j]) for j in sorted(chosen)]
        else:
            for _ in range(extra):
                best = None
                for j in pool:
                    cand = LayeredBallSolution(_merge(balls + [(gs.X2[j], gs.R2[j])]))
                    c = lb_cost(lb, cand)
                    if best is None or c < best[0] - 1e-12:
                        best = (c, j)
                pool.remove(best[1])
                balls.append((gs.X2[best[1]], gs.R2[best[1]]))
    sol = LayeredBallSolution(_merge(balls))
    if len(sol) > k:
        raise AssertionError(f"rounding opened {len(sol)} balls for k={k}")
    return RoundingResult(sol, gs, ks)


# -- full pipeline ----------------------------------------------------------

def lbkm_factor(n):
    return 216 * math.log2(n) + 360


def rounding_bound(n, m, opt, Gamma):
    return (12 * math.log2(n) + 24) * opt + 9 * m * Gamma


@dataclass(eq=False)
class LbkmResult:
    solution: LayeredBallSolution
    cost: float
    pair: Optional[tuple]
    pairs_tried: int
    pairs_skipped: int


def _single_point(lb):
    """Exact optimum for one point: per layer, radius 0 or the full distance."""
    d = lb.base.pf[0]
    x = int(np.argmin(d))
    r = np.where(lb.mu < lb.rho, d[x], 0.0)
    return LayeredBallSolution({x: r})


def solve_lbkm(inst, cap=DEFAULT_RADII_CAP, details=False):
    """Approximate Layered Ball k-Median: best rounded solution over all guesses."""
    if inst.m == 0:
        raise DomainError("instance has no layers")
    if inst.n == 1:
        sol = _single_point(inst)
        res = LbkmResult(sol, lb_cost(inst, sol), None, 0, 0)
        return res if details else sol
    sparse = sparsify(inst)
    if sparse.lb.m == 0:
        # every layer is free; zero radii on the sparse side cost nothing
        sol = unsparsify_solution(sparse, LayeredBallSolution({0: np.zeros(0)}))
        res = LbkmResult(sol, lb_cost(inst, sol), None, 0, 0)
        return res if details else sol
    best, tried, skipped = None, 0, 0
    for Delta, Gamma in guess_pairs(sparse):
        try:
            radii = enumerate_radii(inst.n, sparse.lb.m, sparse.lb.mu, Delta, Gamma, cap=cap)
        except BudgetExceeded as exc:
            log.debug("skipping guess (%.6g, %.6g): %s", Delta, Gamma, exc)
            skipped += 1
            continue
        if len(radii) == 0:
            continue
        tried += 1
        bi = binary_search(sparse.lb, Delta, Gamma, radii=radii)
        rounded = round_bipoint(bi, sparse.lb)
        sol = unsparsify_solution(sparse, rounded)
        c = lb_cost(inst, sol)
        if best is None or c < best.cost - 1e-12:
            best = LbkmResult(sol, c, (Delta, Gamma), 0, 0)
    if best is None:
        raise BudgetExceeded("radius vectors for every guess", "all", cap)
    if skipped:
        log.warning("skipped %d of %d guesses: radius enumeration above cap %d", skipped, tried + skipped, cap)
    best.pairs_tried, best.pairs_skipped = tried, skipped
    return best if details else best.solution
