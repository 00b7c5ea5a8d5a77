import warnings

import numpy as np
import pytest

from philo import baseline as B
from philo import config_lp as L
from philo import decomposition as D
from philo import halfdouble as H
from philo import instance as I

from oracles import halfdouble_expectation


def prepared(inst, eps, eps_e):
    sol, inst = L.tighten(L.build_and_solve(inst), inst)
    b = B.build_bundle(inst, sol)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        dec = D.compute(inst, sol, b, eps=eps, eps_E=eps_e)
    return inst, sol, dec


@pytest.fixture(scope="module")
def mini():
    return prepared(I.gen_unit_demand_hard(0.25), 0.2, 0.3)


def check_trace(run, inst):
    seen = set()
    reward = 0.0
    R = set(range(inst.m))
    for t, s in enumerate(run.steps):
        assert s.R == frozenset(R)
        assert s.S_F == run.Q & (s.A_F | s.B_F)
        assert s.S_req == s.A - run.Q
        assert s.S_get <= s.S_req and not (s.S_get & run.Q)
        assert s.S == (s.S_F & s.R) | s.S_get
        assert not (seen & s.S)
        seen |= s.S
        R -= s.S
        reward += inst.agents[t][s.k].valuation(s.S)
    assert run.reward == pytest.approx(reward, abs=1e-12)


def test_trace_invariants(mini):
    inst, sol, dec = mini
    plan = H.HalfDoublePlan(inst, sol, dec)
    for s in range(300):
        check_trace(H.run_halfdouble(inst, sol, dec, s, plan), inst)


@pytest.mark.parametrize("seed", range(3))
def test_trace_invariants_random(seed):
    inst, sol, dec = prepared(I.gen_random_submodular(5, 4, 2, seed=seed), 0.3, 0.2)
    plan = H.HalfDoublePlan(inst, sol, dec)
    for s in range(100):
        check_trace(H.run_halfdouble(inst, sol, dec, s, plan), inst)


def test_no_late_free_tuples_degenerates():
    inst, sol, dec = prepared(I.gen_unit_demand_hard(0.25), 1e-16, 0.033)
    assert not dec.FR_L
    plan = H.HalfDoublePlan(inst, sol, dec)
    for s in range(100):
        run = H.run_halfdouble(inst, sol, dec, s, plan)
        assert all(not st.S_F for st in run.steps)
        for t, st in enumerate(run.steps):
            assert not (st.S & run.Q)
            v = inst.agents[t][st.k].valuation
            assert st.f_req == pytest.approx(v(st.S_req))


def test_mean_matches_exact_expectation(mini):
    inst, sol, dec = mini
    exact = halfdouble_expectation(inst, sol, dec)
    plan = H.HalfDoublePlan(inst, sol, dec)
    r = np.array([H.run_halfdouble(inst, sol, dec, s, plan).reward for s in range(20000)])
    se = r.std(ddof=1) / np.sqrt(len(r))
    assert abs(r.mean() - exact) <= 3 * se


def test_seed_determinism(mini):
    inst, sol, dec = mini
    plan = H.HalfDoublePlan(inst, sol, dec)
    a = H.run_halfdouble(inst, sol, dec, 99, plan)
    b = H.run_halfdouble(inst, sol, dec, 99, H.HalfDoublePlan(inst, sol, dec))
    assert a.to_dict() == b.to_dict()


def test_plan_mismatch(mini):
    inst, sol, dec = mini
    plan = H.HalfDoublePlan(inst, sol, dec)
    other = prepared(I.gen_unit_demand_hard(0.25), 0.2, 0.3)
    with pytest.raises(ValueError):
        H.run_halfdouble(other[0], other[1], other[2], 0, plan)


def test_item_problems_are_exante_feasible(mini):
    inst, sol, dec = mini
    plan = H.HalfDoublePlan(inst, sol, dec)
    mass = sol.item_mass(inst.m)
    rng = np.random.default_rng(0)
    for _ in range(20):
        Q = frozenset(int(i) for i in np.flatnonzero(rng.random(inst.m) < 0.5))
        pis, _ = plan.item_problems(Q)
        for i, pi in enumerate(pis):
            assert pi.exante_mass <= mass[i] + 1e-9
            if i in Q:
                assert pi.exante_mass == 0


def test_sampled_thresholds_close_to_exact(mini):
    inst, sol, dec = mini
    exact = H.HalfDoublePlan(inst, sol, dec)
    approx = H.HalfDoublePlan(inst, sol, dec, max_triples=1, mc_samples=20000)
    Q = frozenset({0, 2})
    te, _ = exact.thresholds(Q)
    ta, info = approx.thresholds(Q, np.random.default_rng(1))
    assert info["estimated_steps"] == list(range(inst.T))
    bound = sum(info["error_bounds"])
    for i in range(inst.m):
        for t in range(inst.T):
            assert abs(te[i][t] - ta[i][t]) <= bound + 1e-9


def test_aft_audit(mini):
    inst, sol, dec = mini
    a = H.audit_late_free_request_prob(inst, sol, dec)
    assert a["pass"] and a["max"] == pytest.approx(0.25)
    inst2, sol2, dec2 = prepared(I.gen_unit_demand_hard(0.02), 0.01, 0.033)
    a2 = H.audit_late_free_request_prob(inst2, sol2, dec2)
    T = inst2.T - 1
    assert set(k[0] for k in a2["probs"]) == {T}
    assert a2["max"] == pytest.approx(0.02) and a2["pass"]
    empty = prepared(I.gen_unit_demand_hard(0.25), 1e-16, 0.033)
    assert H.audit_late_free_request_prob(*empty)["max"] == 0


def test_availability_audit(mini):
    inst, sol, dec = mini
    plan = H.HalfDoublePlan(inst, sol, dec)
    runs = [H.run_halfdouble(inst, sol, dec, s, plan) for s in range(2000)]
    rep = H.audit_free_item_availability(runs, inst, sol, dec, min_runs=1000)
    assert rep.passed
    np.testing.assert_array_equal(rep.availability[0][rep.counts > 0], 1.0)
    with pytest.raises(ValueError):
        H.audit_free_item_availability(runs[:10], inst, sol, dec)


def test_availability_is_one_without_late_free_tuples():
    inst, sol, dec = prepared(I.gen_unit_demand_hard(0.25), 1e-16, 0.033)
    plan = H.HalfDoublePlan(inst, sol, dec)
    runs = [H.run_halfdouble(inst, sol, dec, s, plan) for s in range(500)]
    rep = H.audit_free_item_availability(runs, inst, sol, dec, min_runs=500)
    assert np.all(rep.availability[:, rep.counts > 0] == 1.0)


def test_pi_half_of_requested_value(mini):
    inst, sol, dec = mini
    plan = H.HalfDoublePlan(inst, sol, dec)
    runs = [H.run_halfdouble(inst, sol, dec, s, plan) for s in range(3000)]
    assert H.check_half_requested_value(runs)["pass"]


def test_trace_json(mini):
    inst, sol, dec = mini
    d = H.run_halfdouble(inst, sol, dec, 0).to_dict()
    assert set(d) == {"Q", "reward", "steps", "info"}
    assert len(d["steps"]) == inst.T
