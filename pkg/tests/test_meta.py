import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from normclust.bipoint import lbkm_factor
from normclust.exceptions import ConfigurationError, NormClustError
from normclust.instance import line_instance, nearest_assignment, random_instance, solution_cost
from normclust.meta import (
    SubroutineRegistry,
    SubroutineResult,
    clear_cache,
    default_mnkc,
    farthest_first_linf,
    inner_penalty,
    local_search_mnkc,
    outer_penalty,
    solve_auto,
    solve_chif,
    solve_chig,
    solve_k_apx,
    solve_ord_l1,
    solve_sym_l1,
)
from normclust.norms import NormSpec, evaluate, ordered_surrogate
from normclust.oracle import exact_mnkc, exact_ncc


def test_ord_l1_kmedian(kmedian_line):
    rep = solve_ord_l1(kmedian_line, np.ones(3))
    assert exact_ncc(kmedian_line, NormSpec.l1(3), NormSpec.l1(1))[0] == 6
    assert rep.cost <= rep.proven_factor * 6
    assert rep.proven_factor == pytest.approx(lbkm_factor(3))
    assert rep.algorithm == "ord-l1"


def test_ord_l1_colocated():
    inst = line_instance([2, 2, 2], [0, 2], 1)
    assert solve_ord_l1(inst, [1, 0, 0]).cost == 0


def test_ord_l1_rejects_non_ordered(kmedian_line):
    with pytest.raises(ValueError):
        solve_ord_l1(kmedian_line, NormSpec.lp(2, 3))


def test_sym_l1_fixed_point():
    inst = random_instance(5, 3, 2, seed=4)
    a = solve_sym_l1(inst, NormSpec.ordered([3, 2, 2, 1, 0]))
    b = solve_ord_l1(inst, [3, 2, 2, 1, 0])
    assert a.cost == b.cost and a.solution.centers == b.solution.centers
    assert a.proven_factor == b.proven_factor
    c = solve_sym_l1(inst, NormSpec.top(2, 5))
    d = solve_ord_l1(inst, [1, 1, 0, 0, 0])
    assert c.cost == pytest.approx(d.cost) and c.solution.centers == d.solution.centers


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_sym_l1_l2_within_bound(seed):
    inst = random_instance(4, 3, 2, seed=seed)
    f = NormSpec.lp(2, 4)
    rep = solve_sym_l1(inst, f)
    opt = exact_ncc(inst, f, NormSpec.l1(2))[0]
    dist = ordered_surrogate(f).distortion_bound
    assert rep.proven_factor == pytest.approx(lbkm_factor(4) * dist)
    assert rep.cost <= rep.proven_factor * opt + 1e-9
    assert rep.notes


def test_chig_factors():
    inst = random_instance(5, 4, 4, seed=1)
    f = NormSpec.l1(5)
    sym = solve_sym_l1(inst, f)
    assert solve_chig(inst, f, NormSpec.l1(4)).proven_factor == pytest.approx(sym.proven_factor)
    assert solve_chig(inst, f, NormSpec.linf(4)).proven_factor == pytest.approx(4 * sym.proven_factor)
    assert outer_penalty(NormSpec.top(2, 4)) == pytest.approx(2)
    assert inner_penalty(NormSpec.l1(8)) == pytest.approx(8)


def k_center_opt(inst):
    return exact_mnkc(inst, NormSpec.linf(inst.n))[0]


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_chif_default_is_a_k_center_heuristic(seed):
    inst = random_instance(6, 4, 2, seed=seed)
    rep = solve_chif(inst, NormSpec.linf(6), NormSpec.linf(2))
    assert rep.heuristic
    # farthest-first on the points, mapped to the nearest facility, is within 3 of k-center
    assert rep.cost <= 3 * k_center_opt(inst) + 1e-9


def test_chif_factor_with_registered_bound():
    inst = random_instance(8, 3, 2, seed=0)
    reg = SubroutineRegistry(linf_sym_solver=farthest_first_linf, linf_sym_factor=2.0)
    rep = solve_chif(inst, NormSpec.l1(8), NormSpec.l1(2), reg)
    assert rep.proven_factor == pytest.approx(2 * 8)
    co = line_instance([1, 1, 1], [1, 4], 1)
    assert solve_chif(co, NormSpec.l1(3), NormSpec.l1(1)).cost == 0


def test_k_apx_opens_everything_when_allowed():
    inst = random_instance(5, 3, 3, seed=2)
    rep = solve_k_apx(inst, NormSpec.l1(5), NormSpec.l1(3))
    assert rep.solution.centers == (0, 1, 2)
    np.testing.assert_array_equal(rep.solution.assignment, nearest_assignment(inst, (0, 1, 2)).assignment)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_k_apx_bound_and_sandwich(seed):
    inst = random_instance(5, 4, 3, seed=seed)
    f, g = NormSpec.l1(5), NormSpec.linf(3)
    rep = solve_k_apx(inst, f, g)
    assert rep.proven_factor == 3
    assert rep.cost <= 3 * exact_ncc(inst, f, g)[0] + 1e-9
    # outer-of-inner cost sits between the global vector's cost scaled by g(1)/k and by g(1)
    cl = rep.solution
    total = float(evaluate(f, inst.pf[np.arange(inst.n), cl.assignment]))
    g1 = float(evaluate(g, np.ones(3)))
    assert rep.cost <= g1 * total + 1e-9
    assert g1 * total <= 3 * rep.cost + 1e-9


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_auto_takes_the_cheapest(seed):
    inst = random_instance(5, 4, 2, seed=seed)
    f, g = NormSpec.lp(2, 5), NormSpec.linf(2)
    rep = solve_auto(inst, f, g)
    parts = [solve_chig(inst, f, g), solve_chif(inst, f, g), solve_k_apx(inst, f, g)]
    assert rep.cost == pytest.approx(min(p.cost for p in parts))
    assert rep.cost == pytest.approx(solution_cost(inst, rep.solution, f, g))
    assert rep.algorithm.startswith("auto:")
    assert rep.proven_factor == pytest.approx(min(p.proven_factor for p in parts if p.proven_factor))
    serial = solve_auto(inst, f, g, parallel=False)
    assert serial.cost == rep.cost and serial.algorithm == rep.algorithm


def test_auto_factor_regimes():
    inst = random_instance(6, 5, 3, seed=0)
    # L1 inside and out: the layered-ball path has no outer penalty, k-apx pays k
    rep = solve_auto(inst, NormSpec.l1(6), NormSpec.l1(3))
    chig = solve_chig(inst, NormSpec.l1(6), NormSpec.l1(3))
    assert rep.proven_factor == min(chig.proven_factor, 3.0)
    # L1 inside, L-infinity outside: only the k-apx path has a small bound
    rep = solve_auto(inst, NormSpec.l1(6), NormSpec.linf(3))
    assert rep.proven_factor == 3.0


def test_missing_and_broken_subroutines():
    inst = random_instance(4, 3, 2, seed=0)
    f, g = NormSpec.l1(4), NormSpec.l1(2)
    with pytest.raises(ConfigurationError):
        solve_k_apx(inst, f, g, SubroutineRegistry())
    with pytest.raises(ConfigurationError):
        solve_chif(inst, f, g, SubroutineRegistry())
    greedy = SubroutineRegistry(mnkc_solver=lambda inst, f: (0, 1, 2))
    with pytest.raises(NormClustError):
        solve_k_apx(inst, f, g, greedy)
    # auto survives a failing subroutine as long as one solver works
    rep = solve_auto(inst, f, g, SubroutineRegistry(mnkc_solver=default_mnkc))
    assert any("chif" in note for note in rep.notes)


def test_registry_results_carry_factors():
    inst = random_instance(4, 3, 2, seed=0)
    reg = SubroutineRegistry(mnkc_solver=lambda inst, f: SubroutineResult((0, 1), 5.0, "fixed"))
    rep = solve_k_apx(inst, NormSpec.l1(4), NormSpec.l1(2), reg)
    assert rep.proven_factor == 10.0 and "fixed" in rep.notes
    bare = SubroutineRegistry(mnkc_solver=lambda inst, f: (0,))
    assert solve_k_apx(inst, NormSpec.l1(4), NormSpec.l1(2), bare).heuristic


def test_local_search_on_larger_instances():
    inst = random_instance(8, 12, 3, seed=5)
    X = local_search_mnkc(inst, NormSpec.l1(8))
    assert len(X) == 3
    opt = exact_mnkc(inst, NormSpec.l1(8))[0]
    value = evaluate(NormSpec.l1(8), inst.pf[:, list(X)].min(axis=1))
    assert value <= 5 * opt  # single-swap local search for k-median is a 5-approximation


def test_cache_is_transparent():
    inst = random_instance(5, 3, 2, seed=9)
    clear_cache()
    a = solve_ord_l1(inst, np.ones(5))
    b = solve_ord_l1(inst, np.ones(5))
    clear_cache()
    c = solve_ord_l1(inst, np.ones(5))
    assert a.cost == b.cost == c.cost
    assert a.solution.centers == c.solution.centers


def test_report_costs_are_recomputed():
    inst = random_instance(5, 4, 2, seed=11)
    f, g = NormSpec.top(2, 5), NormSpec.linf(2)
    for solve in (solve_ord_l1, solve_sym_l1, solve_chig, solve_chif, solve_k_apx, solve_auto):
        rep = solve(inst, f, g)
        assert rep.cost == pytest.approx(solution_cost(inst, rep.solution, f, g), abs=1e-12)
        assert len(rep.solution.centers) <= inst.k
        assert rep.chi_f == pytest.approx(math.log(2) / math.log(5))
        assert rep.chi_g == 0
