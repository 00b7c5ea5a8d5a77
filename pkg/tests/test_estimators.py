import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from philo import config_lp as L
from philo import instance as I
from philo.estimators import (BaselineAllocator, CombinedAllocator, HalfDoubleAllocator,
                              WeLargeAllocator)
from philo.exceptions import InstanceError
from philo.instance import AgentType, Instance
from philo.valuations import Additive


def test_params_round_trip():
    m = CombinedAllocator(eps=0.01, eps_e=0.05, force="baseline")
    assert m.get_params()["force"] == "baseline"
    c = clone(m)
    assert c.get_params() == m.get_params()


def test_not_fitted():
    with pytest.raises(NotFittedError):
        BaselineAllocator().run(0)


def test_fit_validates_instance():
    bad = Instance(1, [[AgentType(0.5, Additive([1.0]), (frozenset(),))]])
    with pytest.raises(InstanceError):
        BaselineAllocator().fit(bad)
    with pytest.raises(TypeError):
        BaselineAllocator().fit([1, 2, 3])


def test_fit_with_given_solution():
    inst = I.gen_unit_demand_hard(0.1)
    sol = L.build_and_solve(inst)
    m = BaselineAllocator().fit(inst, solution=sol)
    assert m.lp_.tight and m.lp_.objective == pytest.approx(19)


@pytest.mark.parametrize("cls", [BaselineAllocator, WeLargeAllocator, HalfDoubleAllocator,
                                 CombinedAllocator])
def test_predict_and_score(cls):
    inst = I.gen_unit_demand_hard(0.25)
    m = cls(eps=0.2, eps_e=0.3).fit(inst)
    r = m.predict(range(50))
    assert r.shape == (50,) and np.all(r >= 0)
    assert m.score(range(50)) == pytest.approx(r.mean() / m.lp_.objective)


def test_bad_force():
    with pytest.raises(ValueError):
        CombinedAllocator(force="other").fit(I.gen_unit_demand_hard(0.5))
