from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mbrrm.carrier_power import (SolverOptions, alternating_solve, assign_carriers,
                                 best_coloring, brute_force_plan, capped_waterfill,
                                 color_beams, coloring_baseline, plan_usc, sca_power,
                                 uniform_power, usc_gradient)
from mbrrm.errors import GuardRailError, ValidationError
from mbrrm.metrics import AllocationPlan, plan_violations
from mbrrm.scenario import ScenarioParams, generate_scenario

from conftest import Transponder, make_scenario, small_instance


# -- baselines ---------------------------------------------------------------

def test_uniform_power_examples():
    x = np.array([[1, 1], [1, 1]])
    assert np.all(uniform_power(AllocationPlan(x, np.zeros((2, 2))), 8.0).p == 2.0)
    one = uniform_power(AllocationPlan([[0, 1]], [[0.0, 0.0]]), 8.0)
    assert one.p.tolist() == [[0.0, 8.0]]
    with pytest.raises(ValueError):
        uniform_power(AllocationPlan([[0, 0]], [[0.0, 0.0]]), 8.0)


def test_coloring_two_beams_orthogonal():
    s = make_scenario([[1.0, 0.8], [0.8, 1.0]], [5.0, 5.0], k=2)
    plan = coloring_baseline(s, 2)
    assert (plan.x.sum(axis=1) == 1).all() and (plan.x.sum(axis=0) == 1).all()
    assert plan.p.sum() == pytest.approx(s.p_total)


def test_coloring_full_reuse():
    s = make_scenario([[1.0, 0.2, 0.1], [0.2, 1.0, 0.2], [0.1, 0.2, 1.0]], 1.0, k=2)
    assert coloring_baseline(s, 1).x.all()


def _max_min_same_color(centers, colors):
    d = [np.linalg.norm(centers[a] - centers[b]) for a, b in itertools.combinations(range(len(colors)), 2)
         if colors[a] == colors[b]]
    return min(d, default=np.inf)


def test_coloring_line_alternates():
    centers = np.column_stack([np.arange(4.0), np.zeros(4)])
    colors = color_beams(centers, 2)
    assert colors.tolist() == [0, 1, 0, 1]
    best = max(_max_min_same_color(centers, c) for c in itertools.product(range(2), repeat=4))
    assert _max_min_same_color(centers, colors) == best


def test_coloring_rejects_non_divisor():
    s = make_scenario([[1.0]], [1.0], k=4)
    with pytest.raises(ValidationError) as err:
        coloring_baseline(s, 3)
    assert err.value.field == "n_colors"


def test_best_coloring_candidates():
    s = generate_scenario(ScenarioParams(num_beams=7, seed=1, k_carriers=4))
    plan, n = best_coloring(s)
    assert n in (1, 2, 4)
    assert plan_usc(s, plan.x, plan.p) == max(
        plan_usc(s, *(lambda p: (p.x, p.p))(coloring_baseline(s, d))) for d in (1, 2, 4))


# -- power ---------------------------------------------------------------------

def test_sca_single_beam_uses_full_power():
    s = make_scenario([[1.0]], [100.0], k=1, p_total=10.0)
    trace = []
    p = sca_power(s, [[1]], [[1.0]], trace=trace)
    assert p[0, 0] == pytest.approx(10.0, rel=1e-9)
    # the first convex step already lands on the optimum; the next only confirms it
    assert trace[1] == trace[-1]


def test_sca_orthogonal_matches_grid_search():
    # coloring with n_colors = L: no interference, one convex solve
    s = make_scenario([[1.0, 0.7], [0.7, 2.0]], [3.0, 2.0], noise=[1.0, 0.5], k=2, p_total=6.0)
    base = coloring_baseline(s, 2)
    p = sca_power(s, base.x, base.p)
    got = plan_usc(s, base.x, p)
    grid = np.linspace(0, 6.0, 6001)
    best = -np.inf
    for a in grid:
        q = np.zeros((2, 2))
        q[base.x[:, 0].argmax(), 0] = a
        q[base.x[:, 1].argmax(), 1] = 6.0 - a
        best = max(best, plan_usc(s, base.x, q))
    assert got >= best - 1e-9
    assert got - best < 1e-3 * abs(best)


@pytest.mark.parametrize("seed", range(10))
def test_sca_monotone_and_feasible(seed):
    s = small_instance(seed)
    x = np.ones((s.k_carriers, s.num_beams), dtype=np.int8)
    p0 = uniform_power(AllocationPlan(x, np.zeros(x.shape)), s.p_total).p
    trace = []
    p = sca_power(s, x, p0, trace=trace)
    assert all(b >= a - 1e-9 for a, b in zip(trace, trace[1:]))
    assert plan_violations(s, AllocationPlan(x, p)) == []


def test_sca_rejects_infeasible_start():
    s = make_scenario([[1.0]], [1.0], p_total=1.0)
    with pytest.raises(ValidationError) as err:
        sca_power(s, [[1]], [[2.0]])
    assert err.value.field == "p0"


def test_waterfill_respects_transponder_cap():
    tp = [Transponder("t0", (0,), 2.0, 2), Transponder("t1", (1,), 10.0, 2)]
    s = make_scenario(np.eye(2), [50.0, 50.0], k=2, p_total=10.0, transponders=tp)
    p = capped_waterfill(s, np.ones((2, 2)), np.ones((2, 2)))
    assert p[:, 0].sum() == pytest.approx(2.0, rel=1e-9)
    assert p.sum() == pytest.approx(10.0, rel=1e-9)


def test_waterfill_stops_at_demand():
    s = make_scenario([[1.0]], [1.0], k=1, p_total=10.0)
    p = capped_waterfill(s, np.ones((1, 1)), np.ones((1, 1)))
    assert p[0, 0] == pytest.approx(1.0, rel=1e-9)  # log2(1 + 1) = 1 = D


# -- assignment ----------------------------------------------------------------

def test_zero_demand_beam_gets_no_carriers():
    s = make_scenario([[1.0, 0.1], [0.1, 1.0]], [0.0, 5.0], k=2)
    x = assign_carriers(s, np.full((2, 2), 2.5))
    assert not x[:, 0].any() and x[:, 1].any()


@pytest.mark.parametrize("mode", ["binary_hungarian", "continuous_relax_round"])
def test_isolated_beams_get_all_carriers(mode):
    s = make_scenario(np.eye(3), [50.0] * 3, k=3, p_total=9.0)
    x = assign_carriers(s, np.full((3, 3), 1.0), mode)
    assert x.all()


def test_assignment_respects_carrier_caps():
    tp = [Transponder("a", (0, 1), 5.0, 2), Transponder("b", (2,), 5.0, 1)]
    s = make_scenario(np.eye(3), [50.0] * 3, k=3, p_total=10.0, transponders=tp)
    for mode in ("binary_hungarian", "continuous_relax_round"):
        x = assign_carriers(s, np.full((3, 3), 1.0), mode)
        assert x[:, :2].sum() <= 2 and x[:, 2].sum() <= 1


def test_unknown_mode():
    s = make_scenario([[1.0]], [1.0])
    with pytest.raises(ValidationError):
        assign_carriers(s, [[1.0]], "bogus")


@pytest.mark.parametrize("seed", range(5))
def test_usc_gradient_finite_difference(seed):
    rng = np.random.default_rng(seed)
    s = make_scenario(rng.random((3, 3)) * 0.4 + np.eye(3), rng.random(3) * 20 + 20, k=2,
                      noise=rng.random(3) + 0.5)
    q = rng.random((2, 3)) + 0.1
    g = usc_gradient(s, q)
    h = 1e-6
    for k in range(2):
        for l in range(3):
            dq = np.zeros_like(q)
            dq[k, l] = h
            ones = np.ones_like(q)
            fd = (plan_usc(s, ones, q + dq) - plan_usc(s, ones, q - dq)) / (2 * h)
            assert g[k, l] == pytest.approx(fd, rel=1e-5, abs=1e-7)


# -- alternating ---------------------------------------------------------------

def test_single_beam():
    s = make_scenario([[1.0]], [100.0], k=2, p_total=10.0)
    res = alternating_solve(s)
    assert res.plan.x.all()
    assert res.plan.p.sum() == pytest.approx(10.0)
    C = 2 * np.log2(1 + 5.0)
    assert res.usc == pytest.approx(C - 100.0, rel=1e-9)


def test_strong_cross_gain_goes_orthogonal():
    s = make_scenario([[1.0, 0.95], [0.95, 1.0]], [50.0, 50.0], k=2, p_total=10.0)
    res = alternating_solve(s)
    assert res.plan.x.tolist() in ([[1, 0], [0, 1]], [[0, 1], [1, 0]])
    bf = brute_force_plan(s, 4)
    assert bf.x.sum(axis=1).max() == 1  # oracle agrees: no shared carrier


@pytest.mark.parametrize("seed", range(20))
def test_alternating_beats_baseline_and_bounded_by_oracle(seed):
    s = small_instance(seed, L=3, K=3)
    res = alternating_solve(s)
    assert res.usc >= res.baseline_usc - 1e-9
    assert plan_violations(s, res.plan) == []
    best = [row["best_usc"] for row in res.trace]
    assert all(b >= a for a, b in zip(best, best[1:]))
    for tr in res.sca_traces:
        assert all(b >= a - 1e-9 for a, b in zip(tr, tr[1:]))


@pytest.mark.parametrize("seed", range(8))
def test_alternating_close_to_oracle(seed):
    s = small_instance(seed, L=2, K=2)
    res = alternating_solve(s)
    bf = brute_force_plan(s, 4)
    oracle = plan_usc(s, bf.x, bf.p)
    assert res.usc >= oracle - 0.1 * abs(oracle)


def test_relaxed_mode_runs_and_is_feasible():
    s = generate_scenario(ScenarioParams(num_beams=7, seed=5, n_transponders=2,
                                         transponder_k_cap=6))
    res = alternating_solve(s, SolverOptions(relaxation_mode="continuous_relax_round"))
    assert plan_violations(s, res.plan) == []
    assert res.usc >= res.baseline_usc


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**31), st.integers(0, 3), st.sampled_from([2, 4]))
def test_plans_always_feasible(L, seed, n_tp, K):
    s = generate_scenario(ScenarioParams(num_beams=L, seed=seed, k_carriers=K,
                                         n_transponders=min(n_tp, L), transponder_k_cap=3))
    res = alternating_solve(s, SolverOptions(max_outer_iters=3))
    assert plan_violations(s, res.plan) == []
    assert plan_violations(s, res.baseline) == []
    assert res.usc <= 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 2))
def test_dropping_a_demand_never_lowers_usc(seed, beam):
    s = small_instance(seed, L=3, K=2)
    D = np.array(s.demands)
    D[beam] = 0.0
    before = alternating_solve(s).usc
    after = alternating_solve(s.with_demands(D)).usc
    assert after >= before - 1e-9


def test_trace_csv():
    s = small_instance(3)
    text = alternating_solve(s).trace_csv()
    lines = text.splitlines()
    assert lines[0] == "iter,usc,assignment_changes,best_usc" and lines[1].startswith("0,")


# -- brute force ---------------------------------------------------------------

def test_brute_force_single():
    s = make_scenario([[1.0]], [100.0], p_total=8.0)
    plan = brute_force_plan(s, 4)
    assert plan.x.tolist() == [[1]] and plan.p.tolist() == [[8.0]]
    z = brute_force_plan(s.with_demands([0.0]), 4)
    assert z.x.tolist() == [[0]] and z.p.tolist() == [[0.0]]


def test_brute_force_zero_demands():
    s = make_scenario([[1.0, 0.2], [0.2, 1.0]], [0.0, 0.0], k=2)
    plan = brute_force_plan(s, 4)
    assert not plan.x.any() and not plan.p.any()


def test_brute_force_swap_symmetry():
    s = make_scenario([[1.0, 0.3], [0.3, 1.0]], [4.0, 4.0], k=2, p_total=8.0)
    plan = brute_force_plan(s, 4)
    swapped = AllocationPlan(plan.x[:, ::-1], plan.p[:, ::-1])
    assert plan_usc(s, swapped.x, swapped.p) == pytest.approx(plan_usc(s, plan.x, plan.p))


def test_brute_force_guard_rails():
    s = make_scenario(np.eye(4), [1.0] * 4, k=3)
    with pytest.raises(GuardRailError):
        brute_force_plan(s, 4)
    with pytest.raises(GuardRailError):
        brute_force_plan(make_scenario([[1.0]], [1.0]), 6)


def test_brute_force_with_transponders_feasible():
    tp = [Transponder("a", (0,), 3.0, 1), Transponder("b", (1,), 10.0, 2)]
    s = make_scenario([[1.0, 0.1], [0.1, 1.0]], [20.0, 20.0], k=2, p_total=10.0, transponders=tp)
    plan = brute_force_plan(s, 4)
    assert plan_violations(s, plan) == []
    assert plan.x[:, 0].sum() <= 1
