import numpy as np
import pytest

from philo import baseline as B
from philo import config_lp as L
from philo import decomposition as D
from philo import instance as I
from philo.exceptions import NotTight
from philo.instance import AgentType, Instance
from philo.prophet import benchmark
from philo.valuations import Additive

from oracles import stopping_value

E = frozenset()


def solved(inst):
    sol, inst = L.tighten(L.build_and_solve(inst), inst)
    return inst, sol


@pytest.fixture(scope="module")
def hard01():
    inst, sol = solved(I.gen_unit_demand_hard(0.1))
    return inst, sol, B.build_bundle(inst, sol)


def test_bundle_hard_instance(hard01):
    inst, sol, b = hard01
    for i in range(10):
        pi = b.pis[i]
        nonempty = [(t, s) for t, s in enumerate(pi.steps) if s]
        assert [t for t, _ in nonempty] == [i, 10]
        (a,), (z,) = nonempty[0][1], nonempty[1][1]
        assert (a.value, z.value) == (1.0, 10.0)
        assert a.prob == pytest.approx(0.9) and z.prob == pytest.approx(0.1)
        assert b.opt_values[i] == pytest.approx(1.0)
    assert b.opt_sum == pytest.approx(10.0)


@pytest.mark.parametrize("seed", range(5))
def test_benchmark_equals_item_share(seed):
    inst, sol = solved(I.gen_random_submodular(5, 4, 2, seed=seed))
    b = B.build_bundle(inst, sol)
    for i in range(inst.m):
        assert benchmark(b.pis[i]) == pytest.approx(sol.per_item[i], abs=1e-9)
        assert b.pis[i].exante_mass <= 1 + 1e-9
        ref, _ = stopping_value([[(a.value, a.prob) for a in s] for s in b.pis[i].steps])
        assert b.opt_values[i] == pytest.approx(ref, abs=1e-12)


def test_zero_solution_bundle():
    inst = Instance(1, [[AgentType(1.0, Additive([0.0]), (E,))]])
    sol = L.make_solution(inst, {(0, 0, E): 1.0}, tight=True)
    b = B.build_bundle(inst, sol)
    assert all(not s for s in b.pis[0].steps) and b.opt_sum == 0


def test_bundle_needs_tight():
    inst = I.gen_unit_demand_hard(0.5)
    with pytest.raises(NotTight):
        B.build_bundle(inst, L.build_and_solve(inst))


def test_easy_check_examples(hard01):
    inst, sol, b = hard01
    assert B.easy_check(b, sol, 1e-16)
    inst2, sol2 = solved(I.gen_unit_demand_hard(0.02))
    b2 = B.build_bundle(inst2, sol2)
    assert not B.easy_check(b2, sol2, 0.02)
    half = B.BaselineBundle((), (), (), 0.5 * sol.objective, b.sampler, {}, {})
    assert B.easy_check(half, sol, 0.0)


def test_single_agent_reward_is_deterministic():
    inst, sol = solved(Instance(1, [[AgentType(1.0, Additive([5.0]), (E, {0}))]]))
    b = B.build_bundle(inst, sol)
    assert {B.run_baseline(inst, sol, s, b).reward for s in range(50)} == {5.0}


@pytest.mark.parametrize("seed", range(6))
def test_run_invariants(seed):
    inst, sol = solved(I.gen_random_submodular(5, 4, 2, seed=seed))
    b = B.build_bundle(inst, sol)
    for s in range(200):
        run = B.run_baseline(inst, sol, s, b)
        seen = set()
        for req, got in zip(run.requested, run.allocated):
            assert got <= req
            assert not (seen & got)
            seen |= got
        assert run.reward >= run.pi_value - 1e-9


def test_run_is_seed_deterministic(hard01):
    inst, sol, b = hard01
    a = B.run_baseline(inst, sol, 123, b)
    c = B.run_baseline(inst, sol, 123, b)
    assert a == c


def test_baseline_mean_within_half_and_lp(hard01):
    inst, sol, b = hard01
    r = np.array([B.run_baseline(inst, sol, s, b).reward for s in range(20000)])
    se = r.std(ddof=1) / np.sqrt(len(r))
    assert 0.5 * sol.objective - 3 * se <= r.mean() <= sol.objective
    assert abs(r.mean() - 10.0) <= 4 * se


def test_t_indices():
    inst, sol = solved(I.gen_unit_demand_hard(0.02))
    assert B.t_indices(inst, sol, 0.033) == tuple(range(50))
    inst, sol = solved(I.gen_unit_demand_hard(0.1))
    assert B.t_indices(inst, sol, 0.033) == (10,) * 10


def test_welarge_without_free_tuples_accepts_from_t_i():
    inst, sol = solved(I.gen_unit_demand_hard(0.02))
    b = B.build_bundle(inst, sol)
    dec = D.compute(inst, sol, b, eps=1e-16, eps_E=0.033)
    assert not dec.FR
    pols = B.welarge_policies(inst, sol, b, dec)
    assert all(p.free == frozenset() for p in pols)
    assert [p.t_i for p in pols] == list(range(50))


def test_welarge_lower_bound():
    import warnings
    inst, sol = solved(I.gen_unit_demand_hard(0.1))
    b = B.build_bundle(inst, sol)
    eps, eps_e = 1e-4, 0.033
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dec = D.compute(inst, sol, b, eps=eps, eps_E=eps_e)
    acc = B._welarge_table(b, B.welarge_policies(inst, sol, b, dec))
    r = np.array([B.run_welarge_policy(inst, sol, dec, s, b, acc).reward for s in range(5000)])
    se = r.std(ddof=1) / np.sqrt(len(r))
    bound = (0.5 - 13 * eps ** 0.25 - eps_e ** 2) * sol.objective + eps_e * dec.W_E
    assert r.mean() >= bound - 3 * se


def test_welarge_needs_decomposition(hard01):
    inst, sol, b = hard01
    with pytest.raises(ValueError):
        B.run_welarge_policy(inst, sol, None, 0, b)
