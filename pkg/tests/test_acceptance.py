"""End-to-end acceptance checks, one test per criterion, at the stated tolerances."""
import time
import warnings
from fractions import Fraction

import numpy as np
import pytest

from philo import baseline as B
from philo import config_lp as L
from philo import decomposition as D
from philo import driver as Dr
from philo import halfdouble as H
from philo import instance as I
from philo.prophet import benchmark, optimal_thresholds, random_pi_instance

from oracles import halfdouble_expectation


def prepared(inst, eps, eps_e):
    sol, inst = L.tighten(L.build_and_solve(inst), inst)
    b = B.build_bundle(inst, sol)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        dec = D.compute(inst, sol, b, eps=eps, eps_E=eps_e)
    return inst, sol, b, dec


def se(r):
    return float(np.std(r, ddof=1) / np.sqrt(len(r)))


@pytest.mark.criterion(1)
def test_stopping_value_is_at_least_half_the_benchmark():
    start = time.perf_counter()
    failures = 0
    for seed in range(1000):
        pi = random_pi_instance(np.random.default_rng(seed), max_T=8, max_support=4)
        assert pi.T <= 8 and all(len(s) <= 4 for s in pi.steps)
        assert pi.exante_mass <= 1 + 1e-12
        _, v = optimal_thresholds(pi)
        failures += v < 0.5 * benchmark(pi) - 1e-12
    elapsed = time.perf_counter() - start
    print(f"failures={failures} time={elapsed:.2f}s")
    assert failures == 0 and elapsed < 5


@pytest.mark.criterion(2)
def test_hard_instance_lp_values():
    sol = L.build_and_solve(I.gen_unit_demand_hard(0.1))
    assert sol.objective == pytest.approx(19.0, abs=1e-6)
    inst = I.gen_xos_hard(0.5)
    x = L.feasible_solution_xos(inst)
    assert x.objective == pytest.approx(12.0, abs=1e-9)
    assert L.verify_feasibility(x, inst).passed


@pytest.mark.criterion(3)
def test_baseline_ratio():
    start = time.perf_counter()
    rep = Dr.monte_carlo("baseline", I.gen_unit_demand_hard(0.1), 10 ** 5, 2024)
    ratio = rep.algorithms["baseline"]["ratio_to_lp"]
    print(f"hard instance mean/LP={ratio:.4f}")
    assert ratio == pytest.approx(10 / 19, abs=0.01)
    assert rep.lp_value == pytest.approx(19.0, abs=1e-6)
    for seed in range(20):
        inst, sol, b, _ = prepared(I.gen_random_submodular(5, 5, 2, seed=seed), 1e-16, 0.033)
        r = np.array([B.run_baseline(inst, sol, s, b).reward for s in range(2000)])
        assert r.mean() >= 0.5 * sol.objective - 3 * se(r), seed
    elapsed = time.perf_counter() - start
    print(f"time={elapsed:.1f}s")
    assert elapsed < 60


@pytest.mark.criterion(4)
def test_half_double_gain():
    start = time.perf_counter()
    rep = Dr.monte_carlo("combined", I.gen_unit_demand_hard(0.02), 10 ** 4, 7,
                         eps=0.01, eps_e=0.033, force="halfdouble")
    ratio = rep.algorithms["combined"]["ratio_to_lp"]
    print(f"forced half-double mean/LP={ratio:.4f}")
    assert ratio >= 0.60

    inst, sol, _, dec = prepared(I.gen_unit_demand_hard(0.25), 0.2, 0.3)
    assert inst.m == 4 and dec.FR_L
    exact = halfdouble_expectation(inst, sol, dec)
    plan = H.HalfDoublePlan(inst, sol, dec)
    r = np.array([H.run_halfdouble(inst, sol, dec, s, plan).reward for s in range(20000)])
    print(f"miniature exact={exact:.4f} mc={r.mean():.4f} se={se(r):.4f}")
    assert abs(r.mean() - exact) <= 3 * se(r)
    assert time.perf_counter() - start < 600


@pytest.mark.criterion(5)
def test_decomposition_audits():
    eps = 0.01
    assert eps ** 0.25 >= 0.02
    inst, sol, b, dec = prepared(I.gen_unit_demand_hard(0.02), eps, 0.033)
    audit = D.verify_decomposition_bounds(dec, sol, b)
    assert not audit.vacuous and audit.passed
    aft = H.audit_late_free_request_prob(inst, sol, dec)
    assert aft["max"] <= dec.eps_E
    assert dec.W_E == 0.0

    inst, sol, b, dec = prepared(I.gen_unit_demand_hard(0.1), 0.1, 0.033)
    assert dec.W_E == pytest.approx(inst.m, abs=1e-9)


@pytest.mark.criterion(6)
def test_xos_gap_trend():
    reps = Dr.gap_report([1 / 2, 1 / 3, 1 / 4])
    ratios = [r.opt_online / r.lp_value for r in reps]
    print("ratios=" + ",".join(f"{x:.4f}" for x in ratios))
    assert all(x < 1 for x in ratios)
    assert all(b <= a for a, b in zip(ratios, ratios[1:]))
    generic = Dr.opt_online_dp(I.gen_xos_hard(0.5))
    assert Dr.opt_online_xos_symmetric(0.5) == pytest.approx(generic, abs=1e-6)
    assert Dr.expected_max_block(0.5, 4) == Fraction(176, 70)


def telescopes(val, S):
    return abs(sum(val.marginals(sorted(S)).values()) - val(S)) <= 1e-9


@pytest.mark.criterion(7)
def test_structural_invariants():
    cases = [prepared(I.gen_unit_demand_hard(0.25), 0.2, 0.3)]
    cases += [prepared(I.gen_random_submodular(5, 4, 2, seed=s), 0.3, 0.2) for s in range(3)]
    for inst, sol, b, dec in cases:
        plan = H.HalfDoublePlan(inst, sol, dec)
        for s in range(200):
            run = B.run_baseline(inst, sol, s, b)
            seen = set()
            for t, (k, req, got) in enumerate(zip(run.types, run.requested, run.allocated)):
                assert got <= req and not (seen & got)
                seen |= got
                assert telescopes(inst.agents[t][k].valuation, req)
            hd = H.run_halfdouble(inst, sol, dec, s, plan)
            seen = set()
            for t, st in enumerate(hd.steps):
                assert st.S_get <= st.S_req and not (st.S_get & hd.Q)
                assert not (seen & st.S)
                seen |= st.S
                assert telescopes(inst.agents[t][st.k].valuation, st.S)
    inst = I.gen_unit_demand_hard(0.25)
    for alg in ("baseline", "welarge", "halfdouble", "combined"):
        a = Dr.monte_carlo(alg, inst, 200, 99, eps=0.2, eps_e=0.3).algorithms
        assert a == Dr.monte_carlo(alg, inst, 200, 99, eps=0.2, eps_e=0.3).algorithms


@pytest.mark.criterion(8)
def test_lp_upper_bounds_optimal_online():
    rng = np.random.default_rng(8)
    failures = 0
    for seed in range(20):
        m = int(rng.integers(3, 7))
        inst = I.gen_random_submodular(m, 3, 2, seed=seed, all_subsets=True)
        lp = L.build_and_solve(inst).objective
        failures += lp < Dr.opt_online_dp(inst) - 1e-6
    assert failures == 0
