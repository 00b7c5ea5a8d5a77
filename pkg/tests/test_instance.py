import pytest

from philo import instance as I
from philo.exceptions import InstanceError, TooLarge
from philo.instance import AgentType, Instance, check_instance, validate
from philo.valuations import Additive, UnitDemand, check_monotone_submodular

E = frozenset()


def test_hard_instance_validates():
    assert validate(I.gen_unit_demand_hard(0.5)) == []
    assert validate(I.gen_xos_hard(0.5)) == []


def test_probability_sum_error():
    bad = Instance(1, [[AgentType(0.9, Additive([1]), (E, {0}))]])
    errors = validate(bad)
    assert any("probabilities must sum to 1" in e for e in errors)
    with pytest.raises(InstanceError):
        check_instance(bad)


def test_item_out_of_range_error():
    bad = Instance(2, [[AgentType(1.0, Additive([1, 1]), (E, {2}))]])
    assert any("item out of range" in e for e in validate(bad))


def test_validate_collects_every_error():
    bad = Instance(2, [[AgentType(0.5, Additive([1]), ({0},))]])
    errors = validate(bad)
    assert len(errors) == 3


def test_unit_demand_hard_shape():
    inst = I.gen_unit_demand_hard(0.5)
    assert (inst.m, inst.T) == (2, 3)
    last = inst.agents[-1][0]
    assert last.valuation({0}) == 2 and last.valuation({0, 1}) == 2 and last.valuation(set()) == 0
    inst = I.gen_unit_demand_hard(0.1)
    assert (inst.m, inst.T) == (10, 11)


def test_unit_demand_hard_item_mass():
    d = 0.1
    inst = I.gen_unit_demand_hard(d)
    for i in range(inst.m):
        total = sum(ty.p for _, _, ty in inst.types()
                    if any(i in S for S in ty.family) and any(ty.valuation.weights))
        assert total == pytest.approx((1 - d) + 1)


def test_invalid_delta():
    with pytest.raises(ValueError):
        I.gen_unit_demand_hard(0.3)
    with pytest.raises(ValueError):
        I.gen_unit_demand_hard(1.5)


def test_xos_hard_enumerate():
    inst = I.gen_xos_hard(0.5)
    assert inst.m == 8
    last = inst.agents[-1]
    assert len(last) == 35 == I.count_equipartitions(8, 2)
    parts = {ty.valuation.partition for ty in last}
    assert len(parts) == 35
    for ty in last:
        blocks = [b for b in ty.family if b]
        assert sorted(i for b in blocks for i in b) == list(range(8))
        assert all(len(b) == 4 for b in blocks)
        assert ty.valuation(blocks[0]) == 8


def test_xos_hard_caps_and_sample():
    with pytest.raises(TooLarge):
        I.gen_xos_hard(1 / 3)
    inst = I.gen_xos_hard(1 / 3, mode="sample", n_types=200, seed=1)
    assert inst.m == 27 and len(inst.agents[-1]) == 200
    assert validate(inst) == []


def test_random_instance_deterministic():
    a = I.gen_random_submodular(4, 3, 2, seed=7)
    b = I.gen_random_submodular(4, 3, 2, seed=7)
    assert validate(a) == []
    assert I.dumps(a) == I.dumps(b)
    for _, _, ty in a.types():
        rep = check_monotone_submodular(ty.valuation)
        assert rep.monotone and rep.submodular


@pytest.mark.parametrize("make", [
    lambda: I.gen_unit_demand_hard(0.25),
    lambda: I.gen_xos_hard(0.5),
    lambda: I.gen_random_submodular(5, 3, 2, seed=1),
    lambda: Instance(1, [[AgentType(1.0, UnitDemand([2.0]), (E, {0}))]], name="tiny"),
])
def test_round_trip_byte_identical(make, tmp_path):
    inst = make()
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    I.save(inst, p1)
    I.save(I.load(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert I.load(p1) == inst


def test_file_items_are_one_based():
    d = I.to_dict(I.gen_unit_demand_hard(0.5))
    assert d["agents"][0][0]["family"] == [[], [1]]
