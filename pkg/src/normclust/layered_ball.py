"""Layered Ball k-Median: model, reduction from ordered inner norms, sparsification
and the canonic candidate radii.

Each open facility carries ``m`` concentric radii. A point pays
``rho_i * (d - r_i)^+`` on every layer beyond the radius, and a ball pays
``mu . r`` for its radii.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import BudgetExceeded, DomainError
from .instance import Clustering, MetricInstance, instance_from_json, instance_to_json
from .norms import sort_desc

log = logging.getLogger(__name__)

DEFAULT_RADII_CAP = 10**7


def ceil_log2(n):
    """Smallest integer j with 2**j >= n (0 for n <= 1)."""
    return 0 if n <= 1 else (int(n) - 1).bit_length()


@dataclass(frozen=True, eq=False)
class LayeredBallInstance:
    base: MetricInstance
    rho: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float).reshape(-1)
        mu = np.array(self.mu, dtype=float).reshape(-1)
        if rho.shape != mu.shape:
            raise DomainError(f"rho and mu must have equal length, got {len(rho)} and {len(mu)}")
        if np.any(rho < 0) or np.any(mu < 0):
            raise DomainError("rho and mu must be nonnegative")
        for a in (rho, mu):
            a.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "mu", mu)

    @property
    def m(self):
        return len(self.rho)

    @property
    def n(self):
        return self.base.n

    @property
    def k(self):
        return self.base.k

    def with_weights(self, rho, mu):
        return LayeredBallInstance(self.base, rho, mu)


@dataclass(frozen=True, eq=False)
class LayeredBallSolution:
    """Open facilities (indices) with one radius vector each.

    Facility-location runs may open more than k balls, so the budget is not
    enforced here; see :meth:`check_budget`.
    """

    radii: dict

    def __post_init__(self):
        clean = {}
        for x, r in sorted(self.radii.items()):
            r = np.array(r, dtype=float).reshape(-1)
            if np.any(r < 0):
                raise DomainError("radii must be nonnegative")
            r.setflags(write=False)
            clean[int(x)] = r
        lengths = {len(r) for r in clean.values()}
        if len(lengths) > 1:
            raise DomainError("all radius vectors must have the same length")
        object.__setattr__(self, "radii", clean)

    @property
    def centers(self):
        return tuple(self.radii)

    def __len__(self):
        return len(self.radii)

    def check_budget(self, k):
        if len(self.radii) > k:
            raise DomainError(f"{len(self.radii)} balls exceed budget k={k}")

    def radius_matrix(self):
        return np.array([self.radii[x] for x in self.centers])


def penalty(d, r, rho):
    """Layered connection cost ``sum_i rho_i (d - r_i)^+``, broadcasting d against r's leading axes."""
    d = np.asarray(d, dtype=float)
    r = np.asarray(r, dtype=float)
    return np.maximum(d[..., None] - r, 0.0) @ rho


def lb_connection_cost(inst, p, x, r):
    r = np.asarray(r, dtype=float)
    if r.shape != (inst.m,):
        raise DomainError(f"radius vector must have length {inst.m}")
    return float(penalty(inst.base.pf[p, x], r, inst.rho))


def connection_matrix(inst, sol):
    """Matrix (points x open balls) of layered connection costs."""
    X = list(sol.centers)
    R = sol.radius_matrix()
    d = inst.base.pf[:, X]
    return np.maximum(d[:, :, None] - R[None, :, :], 0.0) @ inst.rho


def lb_cost(inst, sol):
    if len(sol) == 0:
        raise DomainError("a layered-ball solution needs at least one ball")
    if len(next(iter(sol.radii.values()))) != inst.m:
        raise DomainError(f"radius vectors must have length {inst.m}")
    conn = connection_matrix(inst, sol).min(axis=1).sum()
    return float(conn + sol.radius_matrix().dot(inst.mu).sum())


def reduce_ord_l1(inst, w):
    """Layered-ball instance whose costs track the ordered-weighted k-median objective."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if len(w) != inst.n:
        raise DomainError(f"ordered weights must have length n={inst.n}, got {len(w)}")
    if np.any(w < 0) or np.any(np.diff(w) > 0):
        raise DomainError("ordered weights must be nonnegative and non-increasing")
    rho = w - np.append(w[1:], 0.0)
    mu = rho * np.arange(1, len(w) + 1)
    return LayeredBallInstance(inst, rho, mu)


def assign_to_balls(inst, sol):
    """Index of the cheapest ball for every point (lowest facility index on ties)."""
    X = np.asarray(sol.centers)
    conn = connection_matrix(inst, sol)
    best = conn.min(axis=1, keepdims=True)
    first = np.argmax(conn <= best + 1e-9 * np.maximum(1.0, best), axis=1)
    return X[first]


def lb_solution_to_clustering(lb_inst, lb_sol):
    if len(lb_sol) == 0:
        raise DomainError("solution has no balls")
    return Clustering(lb_sol.centers, assign_to_balls(lb_inst, lb_sol))


def clustering_to_lb_solution(lb_inst, cl):
    if lb_inst.m != lb_inst.n:
        raise DomainError("clusterings convert only for instances with one layer per point")
    cl.check(lb_inst.base)
    radii = {}
    for x in cl.centers:
        vec = np.where(cl.assignment == x, lb_inst.base.pf[:, x], 0.0)
        radii[x] = sort_desc(vec)
    return LayeredBallSolution(radii)


# -- sparsification ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SparseInstance:
    """Sparse layered-ball instance plus what is needed to map solutions back.

    ``buckets[j]`` lists the original layer indices merged into sparse layer
    ``j``. ``small`` and ``large`` are the layers whose cost ratio was raised
    to 1 or lowered to n. Layers with zero rho or zero clamped weight are
    listed in ``dropped``.
    """

    lb: LayeredBallInstance
    original: LayeredBallInstance
    clamped: LayeredBallInstance
    buckets: tuple
    small: frozenset
    large: frozenset
    dropped: frozenset = field(default_factory=frozenset)

    @property
    def ratios(self):
        return self.lb.mu / self.lb.rho


def sparsify(inst):
    n = inst.n
    rho, mu = inst.rho, inst.mu
    keep = rho > 0
    if np.any(~keep & (mu > 0)):
        log.warning("dropping %d layer(s) with rho = 0 and mu > 0", int(np.sum(~keep & (mu > 0))))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(keep, mu / np.where(keep, rho, 1.0), np.nan)
    small = keep & (ratio < 1)
    large = keep & (ratio > n)
    mu1 = np.where(keep, np.minimum(n * rho, mu), mu)
    rho1 = np.where(small, np.minimum(mu, rho), rho)
    # a small layer with mu = 0 becomes weightless; its radius is set on back-conversion
    live = keep & (rho1 > 0)
    clamped = LayeredBallInstance(inst.base, rho1, mu1)

    idx = np.flatnonzero(live)
    r1 = mu1[idx] / rho1[idx]
    order = np.argsort(r1, kind="stable")
    idx, r1 = idx[order], np.clip(r1[order], 1.0, max(n, 1))
    J = max(1, ceil_log2(n))
    bucket_of = np.minimum(np.floor(np.log2(r1)).astype(int), J - 1)
    buckets = tuple(tuple(int(i) for i in idx[bucket_of == j]) for j in range(J) if np.any(bucket_of == j))
    rho2 = np.array([rho1[list(b)].sum() for b in buckets])
    mu2 = np.array([mu1[list(b)].sum() for b in buckets])
    return SparseInstance(
        lb=LayeredBallInstance(inst.base, rho2, mu2),
        original=inst,
        clamped=clamped,
        buckets=buckets,
        small=frozenset(np.flatnonzero(small).tolist()),
        large=frozenset(np.flatnonzero(large).tolist()),
        dropped=frozenset(np.flatnonzero(~live).tolist()),
    )


def unsparsify_solution(sparse, sol):
    """Map a sparse-instance solution back to the original layers."""
    m = sparse.original.m
    X = sol.centers
    broadcast = {}
    for x in X:
        r = np.zeros(m)
        for j, bucket in enumerate(sparse.buckets):
            r[list(bucket)] = sol.radii[x][j]
        broadcast[x] = r
    mid = LayeredBallSolution(broadcast)
    # which ball each point uses in the clamped instance decides the small-layer radii
    owner = assign_to_balls(sparse.clamped, mid)
    pf = sparse.original.base.pf
    rho = sparse.original.rho
    out = {}
    for x in X:
        served = owner == x
        reach = float(pf[served, x].max()) if served.any() else 0.0
        r = broadcast[x].copy()
        for i in range(m):
            if i in sparse.large:
                r[i] = 0.0
            elif i in sparse.small:
                r[i] = reach
            elif rho[i] == 0:
                r[i] = 0.0
        out[x] = r
    return LayeredBallSolution(out)


# -- canonic radii ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CandidateRadii:
    Delta: float
    Gamma: float
    singles: np.ndarray
    vectors: np.ndarray

    def __len__(self):
        return len(self.vectors)


def radius_singles(n, Delta):
    if Delta == 0:
        return np.zeros(1)
    count = max(1, math.ceil(3 * math.log2(n))) if n > 1 else 1
    return Delta / 2.0 ** np.arange(1, count + 1)


def enumerate_radii(n, m, mu, Delta, Gamma, cap=DEFAULT_RADII_CAP):
    if Delta < 0 or Gamma < 0:
        raise DomainError("Delta and Gamma must be nonnegative")
    mu = np.asarray(mu, dtype=float)
    if len(mu) != m:
        raise DomainError(f"mu must have length {m}")
    singles = radius_singles(n, Delta)
    s = len(singles)
    total = math.comb(s + m - 1, m)
    if total > cap:
        raise BudgetExceeded("radius vectors", total, cap)
    if m == 0:
        return CandidateRadii(float(Delta), float(Gamma), singles, np.zeros((1, 0)))
    combos = np.fromiter(itertools.chain.from_iterable(itertools.combinations_with_replacement(range(s), m)),
                         dtype=np.int64, count=total * m).reshape(total, m)
    # singles descend, so reversing the combination order gives ascending lexicographic vectors
    vectors = singles[combos[::-1]]
    ok = vectors @ mu <= Gamma + 1e-9 * max(1.0, Gamma)
    return CandidateRadii(float(Delta), float(Gamma), singles, vectors[ok])


def guess_pairs(sparse):
    """Candidate (largest radius, per-ball budget) pairs for the canonic search."""
    lb = sparse.lb
    n = lb.n
    total_rho = float(lb.rho.sum())
    deltas = np.unique(np.concatenate([lb.base.pf.ravel(), [0.0]]))
    J = max(1, ceil_log2(n))
    pairs = []
    for D in deltas:
        if D == 0:
            pairs.append((0.0, 0.0))
            continue
        for j in range(1, J + 1):
            pairs.append((float(D), float(D * 2.0**j * total_rho)))
    return pairs


# -- JSON -------------------------------------------------------------------

def lb_instance_from_json(obj, validate=True):
    base = instance_from_json(obj, validate=validate)
    try:
        m, rho, mu = int(obj["m"]), obj["rho"], obj["mu"]
    except KeyError as exc:
        raise DomainError(f"layered-ball JSON needs {exc}") from None
    if len(rho) != m or len(mu) != m:
        raise DomainError(f"rho and mu must have length m={m}")
    return LayeredBallInstance(base, rho, mu)


def lb_instance_to_json(inst):
    obj = instance_to_json(inst.base)
    obj.update(m=inst.m, rho=inst.rho.tolist(), mu=inst.mu.tolist())
    return obj
