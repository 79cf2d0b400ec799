"""Metric clustering instances, clusterings and their exact cost."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import DomainError
from .norms import NormSpec, evaluate

TOL = 1e-9


@dataclass(frozen=True)
class MetricReport:
    """Outcome of :func:`validate_metric`.

    ``kind`` is ``"ok"``, ``"asymmetry"``, ``"diagonal"``, ``"negative"`` or
    ``"triangle"``. For a triangle violation ``triple = (i, j, k)`` with
    ``dist[i, j] > dist[i, k] + dist[k, j]`` (0-based indices).
    """

    kind: str
    triple: Optional[tuple] = None
    excess: float = 0.0

    @property
    def ok(self):
        return self.kind == "ok"

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "ok"
        return f"{self.kind} violation at {self.triple} (excess {self.excess:.3g})"


def validate_metric(dist, tol=TOL):
    d = np.asarray(dist, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DomainError(f"distance matrix must be square, got shape {d.shape}")
    neg = np.argwhere(d < -tol)
    if len(neg):
        i, j = neg[0]
        return MetricReport("negative", (int(i), int(j)), float(-d[i, j]))
    diag = np.flatnonzero(np.abs(np.diag(d)) > tol)
    if len(diag):
        i = int(diag[0])
        return MetricReport("diagonal", (i, i), float(abs(d[i, i])))
    asym = np.argwhere(np.abs(d - d.T) > tol)
    if len(asym):
        i, j = asym[0]
        return MetricReport("asymmetry", (int(i), int(j)), float(abs(d[i, j] - d[j, i])))
    for i in range(len(d)):
        # via[j, k] = d[i, k] + d[k, j]
        via = d[i][None, :] + d.T
        excess = d[i][:, None] - via
        bad = np.argwhere(excess > tol)
        if len(bad):
            j, k = bad[0]
            return MetricReport("triangle", (i, int(j), int(k)), float(excess[j, k]))
    return MetricReport("ok")


@dataclass(frozen=True, eq=False)
class MetricInstance:
    """Points, candidate facilities, a metric over their union, and the budget k.

    ``dist`` is indexed by node, where nodes are the points (in order) followed
    by the facilities that are not also points. Use :attr:`pf` for the
    point-by-facility block and :attr:`ff` for facility-by-facility.
    """

    points: tuple
    facilities: tuple
    dist: np.ndarray
    k: int
    coords: Optional[dict] = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        pts, fac = tuple(self.points), tuple(self.facilities)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "facilities", fac)
        if len(pts) < 1:
            raise DomainError("an instance needs at least one point")
        if len(fac) < 1:
            raise DomainError("an instance needs at least one facility")
        if len(set(pts)) != len(pts) or len(set(fac)) != len(fac):
            raise DomainError("point and facility ids must be unique")
        nodes = list(pts) + [f for f in fac if f not in set(pts)]
        dist = np.array(self.dist, dtype=float)
        if dist.shape != (len(nodes), len(nodes)):
            raise DomainError(f"distance matrix must be {len(nodes)}x{len(nodes)}, got {dist.shape}")
        if int(self.k) != self.k or not 1 <= self.k <= len(fac):
            raise DomainError(f"k must satisfy 1 <= k <= {len(fac)}, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        if self.validate:
            report = validate_metric(dist)
            if not report.ok:
                raise DomainError(f"not a metric: {report}")
        dist.setflags(write=False)
        object.__setattr__(self, "dist", dist)
        pos = {v: i for i, v in enumerate(nodes)}
        fidx = np.array([pos[f] for f in fac])
        pf = dist[: len(pts)][:, fidx]
        ff = dist[fidx][:, fidx]
        for a in (pf, ff):
            a.setflags(write=False)
        object.__setattr__(self, "nodes", tuple(nodes))
        object.__setattr__(self, "pf", pf)
        object.__setattr__(self, "ff", ff)

    @property
    def n(self):
        return len(self.points)

    @property
    def num_facilities(self):
        return len(self.facilities)

    def with_k(self, k):
        return MetricInstance(self.points, self.facilities, self.dist, k, self.coords, validate=False)

    def facility_index(self, fid):
        try:
            return self.facilities.index(fid)
        except ValueError:
            raise DomainError(f"unknown facility id {fid!r}") from None


@dataclass(frozen=True, eq=False)
class Clustering:
    """Centers (facility indices) and a point-to-center assignment."""

    centers: tuple
    assignment: np.ndarray

    def __post_init__(self):
        centers = tuple(sorted(set(int(c) for c in self.centers)))
        object.__setattr__(self, "centers", centers)
        a = np.array(self.assignment, dtype=int)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)
        if len(a) and not set(a.tolist()) <= set(centers):
            raise DomainError("every point must be assigned to a chosen center")

    def check(self, inst):
        if len(self.assignment) != inst.n:
            raise DomainError(f"assignment covers {len(self.assignment)} points, instance has {inst.n}")
        if not self.centers:
            raise DomainError("a clustering needs at least one center")
        if self.centers[0] < 0 or self.centers[-1] >= inst.num_facilities:
            raise DomainError("center index out of range")
        if len(self.centers) > inst.k:
            raise DomainError(f"{len(self.centers)} centers exceed budget k={inst.k}")

    def cost(self, inst, f, g):
        return solution_cost(inst, self, f, g)

    def center_ids(self, inst):
        return [inst.facilities[c] for c in self.centers]


def cluster_distance_vector(inst, sol, x):
    """Distances of the points served by center ``x``; zero elsewhere."""
    if x not in sol.centers:
        raise DomainError(f"facility {x!r} is not a center of this clustering")
    d = inst.pf[:, x]
    return np.where(sol.assignment == x, d, 0.0)


def cluster_cost_vector(inst, sol, f):
    """Inner-norm cost of every cluster, in center order."""
    return np.array([float(evaluate(f, cluster_distance_vector(inst, sol, x))) for x in sol.centers])


def pad(v, length):
    v = np.asarray(v, dtype=float)
    if v.shape[-1] > length:
        raise DomainError(f"vector of length {v.shape[-1]} exceeds arity {length}")
    widths = [(0, 0)] * (v.ndim - 1) + [(0, length - v.shape[-1])]
    return np.pad(v, widths)


def solution_cost(inst, sol, f, g):
    """Outer norm of the per-cluster inner-norm costs, zero-padded to g's arity."""
    sol.check(inst)
    if f.arity != inst.n:
        raise DomainError(f"inner norm arity {f.arity} differs from n={inst.n}")
    if g.arity != inst.k:
        raise DomainError(f"outer norm arity {g.arity} differs from k={inst.k}")
    return float(evaluate(g, pad(cluster_cost_vector(inst, sol, f), inst.k)))


def nearest_assignment(inst, X):
    """Assign each point to its closest center in ``X`` (lowest index on ties)."""
    X = sorted(set(int(x) for x in X))
    if not X:
        raise DomainError("center set must be nonempty")
    if X[0] < 0 or X[-1] >= inst.num_facilities:
        raise DomainError("center index out of range")
    sub = inst.pf[:, X]
    # argmin returns the first minimum, and X is sorted, so ties go to the lower index
    choice = np.asarray(X)[np.argmin(sub, axis=1)]
    return Clustering(tuple(X), choice)


def default_norms(inst, inner=None, outer=None):
    f = inner if inner is not None else NormSpec.l1(inst.n)
    g = outer if outer is not None else NormSpec.l1(inst.k)
    return f.with_arity(inst.n), g.with_arity(inst.k)


# -- JSON -------------------------------------------------------------------

def euclidean_matrix(coords):
    c = np.asarray(coords, dtype=float)
    diff = c[:, None, :] - c[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def instance_from_json(obj, validate=True):
    try:
        points, facilities, k = list(obj["points"]), list(obj["facilities"]), obj["k"]
        metric = obj["metric"]
        mtype = metric["type"]
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed instance JSON: missing {exc}") from None
    nodes = points + [f for f in facilities if f not in set(points)]
    coords = None
    if mtype == "matrix":
        dist = np.asarray(metric["values"], dtype=float)
    elif mtype == "coords":
        table = metric["coords"]
        dim = int(metric.get("dim", len(next(iter(table.values())))))
        try:
            rows = [table[str(v)] if str(v) in table else table[v] for v in nodes]
        except KeyError as exc:
            raise DomainError(f"no coordinates for node {exc}") from None
        if any(len(r) != dim for r in rows):
            raise DomainError(f"every coordinate must have dimension {dim}")
        dist = euclidean_matrix(rows) if rows else np.zeros((0, 0))
        coords = {v: tuple(r) for v, r in zip(nodes, rows)}
    else:
        raise DomainError(f"unknown metric type {mtype!r}")
    return MetricInstance(points, facilities, dist, k, coords=coords, validate=validate)


def instance_to_json(inst):
    if inst.coords is not None:
        dim = len(next(iter(inst.coords.values())))
        metric = {"type": "coords", "dim": dim,
                  "coords": {str(v): list(c) for v, c in inst.coords.items()}}
    else:
        metric = {"type": "matrix", "values": inst.dist.tolist()}
    return {"points": list(inst.points), "facilities": list(inst.facilities), "k": inst.k, "metric": metric}


def load_instance(path, validate=True):
    with open(Path(path)) as fh:
        return instance_from_json(json.load(fh), validate=validate)


def line_instance(point_coords, facility_coords, k, point_ids=None, facility_ids=None):
    """Instance on the real line; handy for examples and tests."""
    pids = point_ids or [f"p{i}" for i in range(len(point_coords))]
    fids = facility_ids or [f"f{i}" for i in range(len(facility_coords))]
    c = np.concatenate([np.asarray(point_coords, float), np.asarray(facility_coords, float)])
    dist = np.abs(c[:, None] - c[None, :])
    return MetricInstance(pids, fids, dist, k)


def random_instance(n, num_facilities, k, dim=2, seed=0):
    """Uniform points and facilities in the unit cube with Euclidean distances."""
    rng = np.random.default_rng(seed)
    c = rng.random((n + num_facilities, dim))
    pids = [f"p{i}" for i in range(n)]
    fids = [f"f{i}" for i in range(num_facilities)]
    coords = {v: tuple(float(t) for t in row) for v, row in zip(pids + fids, c)}
    return MetricInstance(pids, fids, euclidean_matrix(c), k, coords=coords)
