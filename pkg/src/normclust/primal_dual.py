"""Lagrange-multiplier-preserving approximation for layered-ball facility location.

A candidate ball is a facility together with one canonic radius vector. Every
point raises its dual at unit rate; once the dual exceeds the layered
connection cost to a ball, the excess goes toward that ball's opening cost
``lambda + mu . r``. A fully paid ball opens and freezes every point tight
with it. The continuous process is simulated exactly, event by event.

Afterwards the paid balls are pruned greedily (most expensive first, dropping
balls that share a contributing point) and their radii are expanded.
"""
from __future__ import annotations

import csv
import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import DomainError
from .layered_ball import CandidateRadii, LayeredBallInstance, LayeredBallSolution

TOL = 1e-9


# -- optional event trace -----------------------------------------------------

_trace_lock = threading.Lock()
_trace_writer = None
_trace_runs = itertools.count()


@contextmanager
def trace_events(stream):
    """Write every ascent event to ``stream`` as CSV while the context is active."""
    global _trace_writer
    writer = csv.writer(stream)
    writer.writerow(["run", "time", "kind", "facility", "radius_index", "point"])
    with _trace_lock:
        previous, _trace_writer = _trace_writer, writer
    try:
        yield
    finally:
        with _trace_lock:
            _trace_writer = previous


def _emit(rows):
    if _trace_writer is None or not rows:
        return
    run = next(_trace_runs)
    with _trace_lock:
        if _trace_writer is not None:
            _trace_writer.writerows([(run, f"{t:.9g}", kind, f, r, p) for t, kind, f, r, p in rows])


# -- model --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BallSystem:
    """All candidate balls for one radius set, with their connection costs.

    Ball ``b`` is facility ``b // V`` with radius vector ``b % V`` where ``V``
    is the number of candidate vectors. ``conn[p, b]`` is the layered
    connection cost of point ``p`` to ball ``b``.
    """

    lb: LayeredBallInstance
    radii: CandidateRadii

    @cached_property
    def conn(self):
        d = self.lb.base.pf  # n x F
        R = self.radii.vectors  # V x m
        c = np.maximum(d[:, :, None, None] - R[None, None, :, :], 0.0) @ self.lb.rho
        return np.ascontiguousarray(c.reshape(self.lb.n, -1))

    @cached_property
    def radius_cost(self):
        return np.tile(self.radii.vectors @ self.lb.mu, self.lb.base.num_facilities)

    @property
    def num_vectors(self):
        return len(self.radii.vectors)

    def ball(self, b):
        return int(b // self.num_vectors), int(b % self.num_vectors)

    def vector(self, b):
        return self.radii.vectors[b % self.num_vectors]


@dataclass(frozen=True, eq=False)
class FacilityLocationInput:
    lb: LayeredBallInstance
    lam: float
    radii: CandidateRadii
    balls: BallSystem = field(default=None)

    def __post_init__(self):
        if self.lam < 0:
            raise DomainError("opening cost must be nonnegative")
        if len(self.radii.vectors) == 0:
            raise DomainError("no candidate radius vectors")
        if self.balls is None:
            object.__setattr__(self, "balls", BallSystem(self.lb, self.radii))

    def with_lambda(self, lam):
        return FacilityLocationInput(self.lb, lam, self.radii, self.balls)


@dataclass(eq=False)
class DualState:
    """Final duals of the ascent.

    ``beta`` maps ``(facility, radius_index, point)`` to the payment for every
    triple whose constraint became tight. ``opened`` lists the paid balls as
    ``(facility, radius_index)`` in opening order, with ``open_time`` alongside.
    """

    alpha: np.ndarray
    opened: list
    open_time: list
    time: float
    balls: BallSystem
    lam: float
    tol: float = TOL

    @cached_property
    def beta_matrix(self):
        """Payments ``(alpha_p - conn[p, b])^+`` as a points x balls array."""
        return np.maximum(self.alpha[:, None] - self.balls.conn, 0.0)

    @cached_property
    def beta(self):
        tight = np.argwhere(self.alpha[:, None] - self.balls.conn >= -self.tol)
        out = {}
        for p, b in tight:
            x, v = self.balls.ball(b)
            out[(x, v, int(p))] = float(self.beta_matrix[p, b])
        return out

    @property
    def Y(self):
        return [(x, tuple(float(r) for r in self.balls.radii.vectors[v])) for x, v in self.opened]

    def contributors(self, ball):
        x, v = ball
        col = self.beta_matrix[:, x * self.balls.num_vectors + v]
        return frozenset(np.flatnonzero(col > self.tol).tolist())


@dataclass(eq=False)
class LmpOutput:
    X: tuple
    q: LayeredBallSolution
    Z: list
    contributors: dict
    duals: DualState

    @property
    def P_Z(self):
        return frozenset().union(*self.contributors.values()) if self.contributors else frozenset()


def _payment_times(C, F, cost, t):
    """Earliest time each ball is fully paid given current frozen payments F.

    ``C`` holds the connection costs of the active points (rows) to each ball.
    The paid amount is ``F + sum_p (T - C[p])^+``; each prefix of the sorted
    costs gives a linear lower bound of it, so the solution is the minimum over
    prefixes.
    """
    if C.shape[0] == 0:
        return np.full(len(cost), np.inf)
    S = np.sort(C, axis=0)
    j = np.arange(1, C.shape[0] + 1)[:, None]
    T = (cost - F + np.cumsum(S, axis=0)) / j
    return np.maximum(T.min(axis=0), t)


def dual_ascent(inp):
    balls = inp.balls
    C = balls.conn
    n, B = C.shape
    cost = inp.lam + balls.radius_cost
    scale = max(1.0, float(C.max(initial=0.0)), float(cost.max(initial=0.0)))
    tol = TOL * scale

    alpha = np.zeros(n)
    active = np.ones(n, dtype=bool)
    is_open = np.zeros(B, dtype=bool)
    frozen_pay = np.zeros(B)
    opened, open_time, trace = [], [], []
    t = 0.0
    while active.any():
        act = np.flatnonzero(active)
        closed = np.flatnonzero(~is_open)
        pay_t = _payment_times(C[np.ix_(act, closed)], frozen_pay[closed], cost[closed], t)
        next_t = pay_t.min(initial=np.inf)
        if is_open.any():
            reach = C[np.ix_(act, np.flatnonzero(is_open))]
            ahead = reach[reach > t]
            if ahead.size:
                next_t = min(next_t, float(ahead.min()))
        if not np.isfinite(next_t):
            raise RuntimeError("dual ascent stalled with active points")
        t = max(t, float(next_t))

        # open every ball paid by now, in ball order (facility, radius index)
        paid = frozen_pay[closed] + np.maximum(t - C[np.ix_(act, closed)], 0.0).sum(axis=0)
        due = closed[paid >= cost[closed] - tol]
        for b in due:
            is_open[b] = True
            opened.append(balls.ball(b))
            open_time.append(t)
            trace.append((t, "open", *balls.ball(b), ""))

        # freeze every active point that is tight with an open ball
        tight = (C[np.ix_(act, np.flatnonzero(is_open))] <= t + tol).any(axis=1)
        for p in act[tight]:
            alpha[p] = t
            active[p] = False
            frozen_pay += np.maximum(t - C[p], 0.0)
            trace.append((t, "freeze", "", "", int(p)))

    _emit(trace)
    return DualState(alpha, opened, open_time, t, balls, float(inp.lam), tol)


def expand(r, mu):
    """Grow each radius by ``2 * mu.r / mu_i``; layers with ``mu_i = 0`` stay put."""
    r = np.asarray(r, dtype=float)
    mu = np.asarray(mu, dtype=float)
    total = float(mu @ r)
    grow = np.divide(2.0 * total, mu, out=np.zeros_like(r), where=mu > 0)
    return r + grow


def prune(duals):
    """Greedy selection of paid balls with pairwise disjoint contributors."""
    balls = duals.balls
    cost = {ball: float(balls.radii.vectors[ball[1]] @ balls.lb.mu) for ball in duals.opened}
    contrib = {ball: duals.contributors(ball) for ball in duals.opened}
    order = sorted(duals.opened, key=lambda ball: (-cost[ball], ball[0], ball[1]))
    Z, remaining = [], list(order)
    while remaining:
        pick = remaining.pop(0)
        Z.append(pick)
        remaining = [b for b in remaining if not (contrib[b] & contrib[pick])]
    return Z


def lmp_solve(inp, duals=None):
    if duals is None:
        duals = dual_ascent(inp)
    Z = prune(duals)
    mu = inp.lb.mu
    q = {}
    for x, v in Z:
        e = expand(inp.radii.vectors[v], mu)
        q[x] = e if x not in q else np.maximum(q[x], e)
    contributors = {ball: duals.contributors(ball) for ball in Z}
    sol = LayeredBallSolution(q)
    return LmpOutput(sol.centers, sol, Z, contributors, duals)
