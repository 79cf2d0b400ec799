import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from normclust.exceptions import DomainError, NotANormError
from normclust.norms import (
    NormSpec,
    attenuation,
    evaluate,
    norm_from_json,
    norm_to_json,
    ordered_surrogate,
    ordered_weights,
    proxy_ordered,
    proxy_top,
    sandwich_bounds,
)


def test_top_and_ordered_values():
    assert evaluate(NormSpec.top(2, 3), [3, 1, 2]) == 5
    assert evaluate(NormSpec.ordered([2, 1, 1]), [1, 3, 2]) == 9


@pytest.mark.parametrize("norm", [NormSpec.l1(4), NormSpec.linf(4), NormSpec.lp(2.5, 4),
                                  NormSpec.top(3, 4), NormSpec.ordered([3, 2, 2, 0])])
def test_zero_vector(norm):
    assert evaluate(norm, np.zeros(4)) == 0


def test_lp_is_stable_for_large_entries():
    assert evaluate(NormSpec.lp(3, 2), [1e200, 1e200]) == pytest.approx(1e200 * 2 ** (1 / 3))


def test_batched_evaluation():
    X = np.array([[3, 1, 2], [0, 0, 1]])
    np.testing.assert_allclose(evaluate(NormSpec.top(2, 3), X), [5, 1])


def test_lp_constructor_special_cases():
    assert NormSpec.lp(1, 3).kind == "l1"
    assert NormSpec.lp(math.inf, 3).kind == "linf"


@pytest.mark.parametrize("bad", [
    lambda: NormSpec.top(4, 3),
    lambda: NormSpec.lp(0.5, 3),
    lambda: NormSpec.ordered([1, 2]),
    lambda: NormSpec.ordered([1, -1]),
    lambda: NormSpec("l1", 0),
    lambda: NormSpec("weird", 2),
])
def test_invalid_specs(bad):
    with pytest.raises(DomainError):
        bad()


def test_arity_mismatch():
    with pytest.raises(DomainError):
        evaluate(NormSpec.l1(3), [1, 2])


def test_with_arity_pads_ordered():
    assert NormSpec.ordered([2, 1]).with_arity(4).weights == (2, 1, 0, 0)
    assert NormSpec.top(2, 3).with_arity(5) == NormSpec.top(2, 5)
    with pytest.raises(DomainError):
        NormSpec.ordered([2, 1]).with_arity(1)


def test_proxy_top_examples():
    assert proxy_top(2, [3, 1, 2], 2) == 5
    assert proxy_top(0, [3, 1, 2], 2) == 6
    assert proxy_top(10, [3, 1, 2], 2) == 20
    with pytest.raises(DomainError):
        proxy_top(-1, [3, 1, 2], 2)


def test_proxy_ordered_examples():
    assert proxy_ordered([3, 1], [2, 1], [3, 1]) == 7
    assert proxy_ordered([3, 1], [2, 1], [0, 0]) == 8
    assert proxy_ordered([5, 4, 1], [0, 0, 0], [1, 1, 0]) == 0


@settings(max_examples=200, deadline=None)
@given(x=arrays(float, st.integers(1, 8), elements=st.floats(0, 100)), data=st.data())
def test_proxy_ordered_bounds(x, data):
    d = len(x)
    w = np.sort(data.draw(arrays(float, d, elements=st.floats(0, 10))))[::-1]
    t = np.sort(data.draw(arrays(float, d, elements=st.floats(0, 100))))[::-1]
    exact = evaluate(NormSpec.ordered(w), x)
    assert proxy_ordered(x, w, np.sort(x)[::-1]) == pytest.approx(exact, abs=1e-9 * max(1, exact))
    assert proxy_ordered(x, w, t) >= exact - 1e-9 * max(1, exact)


@pytest.mark.parametrize("norm,expected", [
    (NormSpec.l1(5), 1.0),
    (NormSpec.linf(5), 0.0),
    (NormSpec.lp(2, 4), 0.5),
    (NormSpec.lp(3, 8), 1 / 3),
    (NormSpec.top(2, 4), 0.5),
    (NormSpec.top(3, 9), 0.5),
])
def test_attenuation_values(norm, expected):
    assert attenuation(norm) == pytest.approx(expected, abs=1e-12)


def test_attenuation_needs_two_coordinates():
    with pytest.raises(DomainError):
        attenuation(NormSpec.l1(1))


@given(d=st.integers(2, 16), data=st.data())
def test_attenuation_in_unit_interval(d, data):
    ell = data.draw(st.integers(1, d))
    for norm in (NormSpec.top(ell, d), NormSpec.lp(data.draw(st.floats(1, 50)), d)):
        assert -1e-12 <= attenuation(norm) <= 1 + 1e-12
    assert attenuation(NormSpec.top(ell, d)) == pytest.approx(math.log(ell) / math.log(d), abs=1e-12)


def test_sandwich_examples():
    lo, hi = sandwich_bounds(NormSpec.lp(2, 4), [2, 0, 0, 0])
    assert (lo, hi) == pytest.approx((1, 4))
    lo, hi = sandwich_bounds(NormSpec.top(2, 3), [1.5, 1.5, 1.5])
    assert lo == pytest.approx(3) and hi == pytest.approx(3)
    assert sandwich_bounds(NormSpec.l1(3), np.zeros(3)) == (0, 0)


@settings(max_examples=100, deadline=None)
@given(x=arrays(float, st.integers(1, 8), elements=st.floats(0, 1e3)), c=st.floats(0.01, 100), seed=st.integers(0, 1000))
def test_symmetric_and_homogeneous(x, c, seed):
    perm = np.random.default_rng(seed).permutation(len(x))
    d = len(x)
    for norm in (NormSpec.l1(d), NormSpec.linf(d), NormSpec.lp(2.5, d), NormSpec.top(max(1, d // 2), d)):
        v = evaluate(norm, x)
        assert evaluate(norm, x[perm]) == pytest.approx(v, rel=1e-9, abs=1e-9)
        assert evaluate(norm, c * x) == pytest.approx(c * v, rel=1e-9, abs=1e-9)


def test_ordered_weights_representation():
    np.testing.assert_allclose(ordered_weights(NormSpec.top(2, 4)), [1, 1, 0, 0])
    np.testing.assert_allclose(ordered_weights(NormSpec.linf(3)), [1, 0, 0])
    assert ordered_weights(NormSpec.lp(2, 3)) is None


def test_surrogate_exact_cases():
    s = ordered_surrogate(NormSpec.l1(4))
    np.testing.assert_allclose(s.weights, np.ones(4))
    assert s.distortion_bound == 1
    s = ordered_surrogate(NormSpec.linf(4))
    np.testing.assert_allclose(s.weights, [1, 0, 0, 0])


def test_surrogate_l2_weights():
    s = ordered_surrogate(NormSpec.lp(2, 4))
    r = np.sqrt(np.arange(5))
    np.testing.assert_allclose(s.weights, np.diff(r), atol=1e-12)
    # the surrogate agrees on prefix-ones vectors and stays within sqrt(d) on random vectors
    rng = np.random.default_rng(0)
    V = rng.random((1000, 4))
    ratio = s.norm(V) / evaluate(NormSpec.lp(2, 4), V)
    assert ratio.min() >= 1 - 1e-9
    assert ratio.max() <= s.distortion_bound + 1e-9
    assert s.distortion_bound <= 2


@pytest.mark.parametrize("d", [2, 5, 9])
@pytest.mark.parametrize("p", [1.5, 2, 4, 10])
def test_surrogate_weights_non_increasing(d, p):
    w = ordered_surrogate(NormSpec.lp(p, d)).weights
    assert np.all(np.diff(w) <= 1e-12) and np.all(w >= 0)


def test_surrogate_rejects_non_concave_prefixes():
    # max(|x|_inf, |x|_1 / 2) on R^4: prefix values 1, 1, 1.5, 2, gaps 1, 0, 0.5, 0.5
    func = lambda x: np.maximum(np.max(x, axis=-1), np.sum(x, axis=-1) / 2)
    h = NormSpec.oracle(func, 4)
    with pytest.raises(NotANormError):
        ordered_surrogate(h)
    s = ordered_surrogate(h, majorize=True)
    assert np.all(np.diff(s.weights) <= 1e-12)
    assert s.distortion_bound >= 1


def test_oracle_norm():
    h = NormSpec.oracle(lambda x: np.sqrt((np.asarray(x) ** 2).sum(axis=-1)), 3)
    assert h([3, 4, 0]) == pytest.approx(5)
    with pytest.raises(DomainError):
        h.with_arity(4)


@pytest.mark.parametrize("norm", [NormSpec.l1(3), NormSpec.linf(3), NormSpec.lp(2, 3),
                                  NormSpec.top(2, 3), NormSpec.ordered([3, 1, 0])])
def test_json_round_trip(norm):
    assert norm_from_json(norm_to_json(norm), 3) == norm


def test_json_errors():
    with pytest.raises(DomainError):
        norm_from_json({"type": "top"}, 3)
    with pytest.raises(DomainError):
        norm_from_json([1, 2], 3)
