from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mbrrm.metrics import (AllocationPlan, metrics_report, min_ratio, mmse, offered_capacity,
                           plan_violations, sinr, sinr_matrix, usc)
from mbrrm.prng import Xoshiro256
from mbrrm.scenario import ScenarioParams, generate_scenario

from conftest import Transponder, make_scenario
from oracles import scalar_capacity, scalar_min_ratio, scalar_mmse, scalar_sinr, scalar_usc


def test_sinr_no_interference():
    s = make_scenario([[1.0]], [1.0], noise=1.0)
    assert sinr(s, AllocationPlan([[1]], [[4.0]]), 0, 0) == 4.0


def test_sinr_unassigned_is_zero():
    s = make_scenario([[1.0]], [1.0])
    assert sinr(s, AllocationPlan([[0]], [[0.0]]), 0, 0) == 0.0


def test_sinr_two_beams():
    s = make_scenario([[1.0, 0.5], [0.5, 1.0]], [1.0, 1.0])
    assert sinr(s, AllocationPlan([[1, 1]], [[2.0, 2.0]]), 0, 0) == 1.0


def test_sinr_index_errors():
    s = make_scenario([[1.0]], [1.0])
    with pytest.raises(IndexError):
        sinr(s, AllocationPlan([[1]], [[1.0]]), 1, 0)


def test_capacity_examples():
    s = make_scenario([[1.0]], [1.0], noise=1.0)
    assert offered_capacity(s, AllocationPlan([[1]], [[3.0]]))[0] == 2.0
    s2 = make_scenario([[1.0, 0.3], [0.3, 1.0]], [1.0, 1.0], k=2)
    np.testing.assert_array_equal(offered_capacity(s2, AllocationPlan(np.zeros((2, 2)), np.zeros((2, 2)))), 0)
    np.testing.assert_allclose(offered_capacity(s2, AllocationPlan([[1, 0], [0, 1]],
                                                                   [[1, 0], [0, 1.0]])), [1, 1])


def test_objective_examples():
    C, D = [5.0, 3.0], [4.0, 4.0]
    assert usc(C, D) == -1.0 and mmse(C, D) == 1.0 and min_ratio(C, D) == 0.75
    assert (usc(D, D), mmse(D, D), min_ratio(D, D)) == (0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        min_ratio([1.0], [0.0])


@given(st.lists(st.floats(0.0, 1e9), min_size=1, max_size=8).flatmap(
    lambda C: st.tuples(st.just(C), st.lists(st.floats(1e-3, 1e9), min_size=len(C),
                                             max_size=len(C)))),
       st.floats(1e-3, 1e3))
def test_min_ratio_scale_invariant(CD, a):
    C, D = (np.array(v) for v in CD)
    assert min_ratio(a * C, a * D) == pytest.approx(min_ratio(C, D), rel=1e-12, abs=1e-300)
    assert np.argmin(a * C / (a * D)) == np.argmin(C / D)
    assert usc(C, D) <= 0.0
    assert (usc(C, D) == 0.0) == bool(np.all(C >= D))


def random_pair(seed):
    rng = Xoshiro256(seed)
    L, K = rng.integers(1, 6), rng.integers(1, 4)
    s = generate_scenario(ScenarioParams(num_beams=L, seed=seed, k_carriers=K,
                                         spacing=rng.uniform(0.3, 2.0)))
    x = np.array([[rng.integers(0, 1) for _ in range(L)] for _ in range(K)])
    w = np.array([[rng.random() for _ in range(L)] for _ in range(K)]) * x
    p = w / w.sum() * s.p_total * rng.random() if w.sum() > 0 else w
    return s, AllocationPlan(x, p)


@pytest.mark.parametrize("seed", range(30))
def test_matches_scalar_oracle(seed):
    s, plan = random_pair(seed)
    g, n, x, p = s.gain.tolist(), s.noise.tolist(), plan.x.tolist(), plan.p.tolist()
    G = sinr_matrix(s.gain, s.noise, plan.x, plan.p)
    for k in range(s.k_carriers):
        for l in range(s.num_beams):
            assert G[k, l] == pytest.approx(scalar_sinr(g, n, x, p, l, k), rel=1e-12, abs=0)
            assert sinr(s, plan, l, k) == pytest.approx(G[k, l], rel=1e-12, abs=0)
    C = scalar_capacity(g, n, x, p, s.carrier_width)
    np.testing.assert_allclose(offered_capacity(s, plan), C, rtol=1e-12, atol=0)
    D = s.demands.tolist()
    rep = metrics_report(s, plan)
    assert rep.usc == pytest.approx(scalar_usc(C, D), rel=1e-12)
    assert rep.mmse == pytest.approx(scalar_mmse(C, D), rel=1e-12)
    assert rep.min_ratio == pytest.approx(scalar_min_ratio(C, D), rel=1e-12, abs=0)
    assert plan_violations(s, plan) == []


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.floats(1.01, 3.0))
def test_power_monotonicity(seed, factor):
    s, plan = random_pair(seed)
    G0 = sinr_matrix(s.gain, s.noise, plan.x, plan.p)
    for k in range(s.k_carriers):
        for l in range(s.num_beams):
            if not plan.x[k, l] or plan.p[k, l] == 0:
                continue
            p = np.array(plan.p)
            p[k, l] *= factor
            G1 = sinr_matrix(s.gain, s.noise, plan.x, p)
            assert G1[k, l] > G0[k, l]
            for m in range(s.num_beams):
                if m != l and plan.x[k, m] and plan.p[k, m] > 0 and s.gain[m, l] > 0:
                    assert G1[k, m] < G0[k, m]
            return


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_removing_interference_never_hurts(seed):
    s, plan = random_pair(seed)
    C = offered_capacity(s, plan)
    diag = np.diag(np.diag(s.gain))
    C0 = sinr_matrix(diag, s.noise, plan.x, plan.p)
    C_free = (s.carrier_width * np.log2(1 + C0)).sum(axis=0)
    assert np.all(C_free >= C - 1e-9 * np.abs(C))


def test_plan_violations():
    tp = Transponder("t", (0, 1), 4.0, 1)
    s = make_scenario([[1.0, 0.1], [0.1, 1.0]], [1.0, 1.0], k=2, p_total=6.0,
                      transponders=[tp])
    bad = AllocationPlan([[1, 1], [0, 0]], [[3.0, 3.0], [1.0, 0.0]])
    msgs = " | ".join(plan_violations(s, bad))
    for part in ("unassigned", "C1", "power cap exceeded", "carrier cap exceeded"):
        assert part in msgs
    assert plan_violations(s, AllocationPlan([[1, 0], [0, 0]], [[4.0, 0], [0, 0]])) == []
    with pytest.raises(Exception):
        AllocationPlan([[1, 0]], [[1.0]])


def test_report_serialization():
    s = make_scenario([[1.0]], [4.0], noise=1.0)
    rep = metrics_report(s, AllocationPlan([[1]], [[3.0]]))
    doc = json.loads(rep.to_json())
    assert doc["usc_bps"] == -2.0 and doc["min_ratio"] == 0.5
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0][0] == "beam" and rows[-1][0] == "summary" and len(rows) == 3
    assert rep.to_json() == metrics_report(s, AllocationPlan([[1]], [[3.0]])).to_json()


def test_report_zero_demand_has_no_ratio():
    s = make_scenario([[1.0, 0.0], [0.0, 1.0]], [0.0, 1.0])
    rep = metrics_report(s, AllocationPlan([[0, 1]], [[0, 1.0]]))
    assert rep.min_ratio is None and math.isnan(rep.satisfaction[0])
