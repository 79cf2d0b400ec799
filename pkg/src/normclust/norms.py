"""Monotone symmetric norms on the nonnegative orthant.

A :class:`NormSpec` is an immutable parametric description (L1, Linf, Lp,
top-ell, ordered-weighted, or a black-box oracle) together with its arity.
Evaluation accepts a single vector or a batch whose last axis is the
coordinate axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import DomainError, NotANormError

KINDS = ("l1", "linf", "lp", "top", "ordered", "oracle")


@dataclass(frozen=True)
class NormSpec:
    kind: str
    arity: int
    p: Optional[float] = None
    ell: Optional[int] = None
    weights: Optional[tuple] = None
    func: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown norm kind {self.kind!r}")
        if int(self.arity) != self.arity or self.arity < 1:
            raise DomainError(f"arity must be a positive integer, got {self.arity}")
        if self.kind == "lp":
            if self.p is None or not self.p >= 1:
                raise DomainError(f"Lp norm needs p >= 1, got {self.p}")
        elif self.kind == "top":
            if self.ell is None or not 1 <= self.ell <= self.arity:
                raise DomainError(f"top-ell needs 1 <= ell <= {self.arity}, got {self.ell}")
        elif self.kind == "ordered":
            w = np.asarray(self.weights, dtype=float)
            if w.ndim != 1 or len(w) != self.arity:
                raise DomainError(f"ordered weights must have length {self.arity}")
            if np.any(w < 0) or np.any(np.diff(w) > 0):
                raise DomainError("ordered weights must be nonnegative and non-increasing")
        elif self.kind == "oracle" and not callable(self.func):
            raise DomainError("oracle norm needs a callable evaluation contract")

    # -- constructors -----------------------------------------------------
    @classmethod
    def l1(cls, d):
        return cls("l1", d)

    @classmethod
    def linf(cls, d):
        return cls("linf", d)

    @classmethod
    def lp(cls, p, d):
        if math.isinf(p):
            return cls("linf", d)
        if p == 1:
            return cls("l1", d)
        return cls("lp", d, p=float(p))

    @classmethod
    def top(cls, ell, d):
        return cls("top", d, ell=int(ell))

    @classmethod
    def ordered(cls, weights):
        w = tuple(float(v) for v in weights)
        return cls("ordered", len(w), weights=w)

    @classmethod
    def oracle(cls, func, d):
        return cls("oracle", d, func=func)

    def with_arity(self, d):
        """The same norm family at arity ``d``.

        Ordered weights shorter than ``d`` are zero-padded; top-ell keeps ell.
        """
        if d == self.arity:
            return self
        if self.kind == "ordered":
            w = list(self.weights)
            if len(w) > d:
                if any(v != 0 for v in w[d:]):
                    raise DomainError(f"cannot shrink ordered weights of length {len(w)} to {d}")
                w = w[:d]
            return NormSpec.ordered(w + [0.0] * (d - len(w)))
        if self.kind == "oracle":
            raise DomainError("oracle norms have a fixed arity")
        return NormSpec(self.kind, d, p=self.p, ell=self.ell)

    def __call__(self, x):
        return evaluate(self, x)

    def __repr__(self):
        if self.kind == "lp":
            return f"NormSpec(lp, p={self.p}, d={self.arity})"
        if self.kind == "top":
            return f"NormSpec(top, ell={self.ell}, d={self.arity})"
        if self.kind == "ordered":
            return f"NormSpec(ordered, w={list(self.weights)})"
        return f"NormSpec({self.kind}, d={self.arity})"


@dataclass(frozen=True)
class OrderedSurrogate:
    weights: np.ndarray
    distortion_bound: float

    @property
    def norm(self):
        return NormSpec.ordered(self.weights)


def _as_input(norm, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (norm.arity,):
        raise DomainError(f"{norm!r} expects vectors of length {norm.arity}, got shape {x.shape}")
    if np.any(x < 0):
        raise DomainError("norm arguments must be nonnegative")
    return x


def sort_desc(x):
    return -np.sort(-np.asarray(x, dtype=float), axis=-1)


def evaluate(norm, x):
    """Value of ``norm`` at ``x`` (vector or batch of vectors on the last axis)."""
    x = _as_input(norm, x)
    kind = norm.kind
    if kind == "l1":
        return x.sum(axis=-1)
    if kind == "linf":
        return x.max(axis=-1)
    if kind == "lp":
        # rescale by the max entry so large p does not overflow
        scale = x.max(axis=-1, keepdims=True)
        safe = np.where(scale > 0, scale, 1.0)
        return (np.sum((x / safe) ** norm.p, axis=-1) ** (1.0 / norm.p)) * safe[..., 0]
    if kind == "top":
        return sort_desc(x)[..., : norm.ell].sum(axis=-1)
    if kind == "ordered":
        return sort_desc(x) @ np.asarray(norm.weights)
    # oracle: the contract is vector -> scalar
    if x.ndim == 1:
        return float(norm.func(x))
    flat = x.reshape(-1, norm.arity)
    out = np.array([float(norm.func(row)) for row in flat])
    return out.reshape(x.shape[:-1])


# public alias matching the operation name
eval_norm = evaluate


def ordered_weights(norm):
    """Weight vector if ``norm`` is exactly an ordered norm, else ``None``."""
    d = norm.arity
    if norm.kind == "l1":
        return np.ones(d)
    if norm.kind == "linf":
        w = np.zeros(d)
        w[0] = 1.0
        return w
    if norm.kind == "top":
        w = np.zeros(d)
        w[: norm.ell] = 1.0
        return w
    if norm.kind == "ordered":
        return np.asarray(norm.weights, dtype=float)
    return None


def ones(d):
    return np.ones(d)


def unit(d, i=0):
    e = np.zeros(d)
    e[i] = 1.0
    return e


def attenuation(norm):
    """(log h(1,...,1) - log h(1,0,...,0)) / log d, logarithms base 2."""
    d = norm.arity
    if d < 2:
        raise DomainError("attenuation is undefined for d = 1")
    top = float(evaluate(norm, ones(d)))
    bottom = float(evaluate(norm, unit(d)))
    if top <= 0 or bottom <= 0:
        raise NotANormError(f"{norm!r} vanishes on a nonzero vector")
    return (math.log2(top) - math.log2(bottom)) / math.log2(d)


def sandwich_bounds(norm, v):
    """Bounds ``(|v|_1 / d * h(1), |v|_inf * h(1))`` that bracket ``h(v)``."""
    v = _as_input(norm, v)
    h1 = float(evaluate(norm, ones(norm.arity)))
    return v.sum(axis=-1) / norm.arity * h1, v.max(axis=-1) * h1


def proxy_top(y, x, ell):
    """Threshold proxy ``ell*y + sum_i (x_i - y)^+``; never below top_ell(x).

    ``y`` may be an array of thresholds; it broadcasts against the leading
    axes of ``x``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("threshold must be nonnegative")
    if not 1 <= ell <= x.shape[-1]:
        raise DomainError(f"ell must lie in [1, {x.shape[-1]}]")
    if np.any(x < 0):
        raise DomainError("proxy arguments must be nonnegative")
    out = ell * y + np.maximum(x - y[..., None], 0.0).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def _check_nonincreasing(v, name):
    v = np.asarray(v, dtype=float)
    if np.any(v < 0) or np.any(np.diff(v) > 0):
        raise DomainError(f"{name} must be nonnegative and non-increasing")
    return v


def proxy_ordered(x, w, t):
    """Sum over i of (w_i - w_{i+1}) * proxy_top(t_i, x, i), with w_{d+1} = 0."""
    x = np.asarray(x, dtype=float)
    w = _check_nonincreasing(w, "weights")
    t = _check_nonincreasing(t, "thresholds")
    d = x.shape[-1]
    if len(w) != d or len(t) != d:
        raise DomainError("x, w and t must have equal length")
    gaps = w - np.append(w[1:], 0.0)
    total = 0.0
    for i in range(d):
        if gaps[i] != 0:
            total = total + gaps[i] * proxy_top(t[i], x, i + 1)
    return total


def _surrogate_corpus(d, samples, seed):
    rng = np.random.default_rng(seed)
    rows = [np.eye(d)[0], np.ones(d)]
    rows += [np.concatenate([np.ones(j), np.zeros(d - j)]) for j in range(1, d)]
    rows += list(rng.random((samples, d)))
    rows += list(rng.exponential(size=(samples, d)) * (rng.random((samples, d)) < 0.5))
    corpus = np.array(rows)
    return corpus[corpus.sum(axis=1) > 0]


def ordered_surrogate(norm, samples=500, seed=0, majorize=False):
    """Ordered norm matching ``norm`` on every prefix-ones vector.

    The weights are the gaps ``h(1^i) - h(1^{i-1})`` of the prefix values.
    ``distortion_bound`` is the worst ratio in either direction observed on a
    seeded random corpus; it is exactly 1 for norms that already are ordered.

    Symmetric norms whose prefix values are not concave in i give increasing
    gaps, which no ordered norm can reproduce. These are rejected unless
    ``majorize`` is set, in which case the least concave majorant of the
    prefix values is used instead (exactness on prefix vectors is then lost).
    """
    exact = ordered_weights(norm)
    if exact is not None:
        return OrderedSurrogate(exact.copy(), 1.0)
    d = norm.arity
    prefix = np.array([0.0] + [float(evaluate(norm, np.concatenate([np.ones(j), np.zeros(d - j)])))
                               for j in range(1, d + 1)])
    gaps = np.diff(prefix)
    tol = 1e-9 * max(1.0, prefix[-1])
    if np.any(np.diff(gaps) > tol):
        if not majorize:
            bad = int(np.argmax(np.diff(gaps) > tol)) + 1
            raise NotANormError(
                f"prefix values of {norm!r} are not concave at i={bad}: "
                f"gap {gaps[bad]:.6g} exceeds previous gap {gaps[bad - 1]:.6g}")
        prefix = _concave_majorant(prefix)
        gaps = np.diff(prefix)
    gaps = np.maximum(gaps, 0.0)
    # clean tiny float inversions so the weights are non-increasing
    gaps = np.minimum.accumulate(gaps)
    corpus = _surrogate_corpus(d, samples, seed)
    worst = _worst_ratio(norm, gaps, corpus, seed)
    return OrderedSurrogate(gaps, float(max(1.0, worst)))


def _distortion(norm, gaps, V):
    h = evaluate(norm, V)
    o = sort_desc(V) @ gaps
    return np.maximum(h / o, o / h)


def _worst_ratio(norm, gaps, corpus, seed, starts=8, steps=200):
    """Sample maximum of the distortion, refined by hill climbing from the worst samples."""
    ratio = _distortion(norm, gaps, corpus)
    best = float(ratio.max())
    rng = np.random.default_rng(seed + 1)
    for v in corpus[np.argsort(ratio)[-starts:]]:
        cur = float(_distortion(norm, gaps, v[None, :])[0])
        scale = 0.5
        for _ in range(steps):
            trial = np.abs(v * np.exp(rng.normal(0.0, scale, (16, len(v)))))
            trial = trial[trial.sum(axis=1) > 0]
            r = _distortion(norm, gaps, trial)
            i = int(np.argmax(r))
            if r[i] > cur:
                v, cur = trial[i], float(r[i])
            else:
                scale = max(scale * 0.9, 1e-3)
        best = max(best, cur)
    return best


def _concave_majorant(values):
    # upper hull of the points (i, values[i])
    hull = []
    for i, v in enumerate(values):
        while len(hull) >= 2:
            (i1, v1), (i2, v2) = hull[-2], hull[-1]
            if (v2 - v1) * (i - i1) <= (v - v1) * (i2 - i1):
                hull.pop()
            else:
                break
        hull.append((i, v))
    xs, ys = zip(*hull)
    return np.interp(np.arange(len(values)), xs, ys)


def norm_from_json(obj, arity):
    """Parse ``{"type": ...}`` into a NormSpec of the given arity."""
    if not isinstance(obj, dict) or "type" not in obj:
        raise DomainError(f"norm JSON must be an object with a 'type' field: {obj!r}")
    t = str(obj["type"]).lower()
    if t == "l1":
        return NormSpec.l1(arity)
    if t == "linf":
        return NormSpec.linf(arity)
    if t == "lp":
        if "p" not in obj:
            raise DomainError("lp norm needs 'p'")
        return NormSpec.lp(float(obj["p"]), arity)
    if t == "top":
        if "ell" not in obj:
            raise DomainError("top norm needs 'ell'")
        return NormSpec.top(int(obj["ell"]), arity)
    if t == "ordered":
        if "weights" not in obj:
            raise DomainError("ordered norm needs 'weights'")
        return NormSpec.ordered(obj["weights"]).with_arity(arity)
    raise DomainError(f"unknown norm type {t!r}")


def norm_to_json(norm):
    if norm.kind in ("l1", "linf"):
        return {"type": norm.kind}
    if norm.kind == "lp":
        return {"type": "lp", "p": norm.p}
    if norm.kind == "top":
        return {"type": "top", "ell": norm.ell}
    if norm.kind == "ordered":
        return {"type": "ordered", "weights": list(norm.weights)}
    raise DomainError("oracle norms cannot be written as JSON")
