"""Estimator-style wrappers around the allocation algorithms.

``fit`` takes an :class:`~philo.instance.Instance`, solves and tightens the LP
(or uses a given solution) and prepares whatever the algorithm needs.
``run(seed)`` returns one trace, ``predict(seeds)`` the rewards of many runs
and ``score(seeds)`` their mean as a fraction of the LP value.
"""
from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import baseline as bl
from . import decomposition as dc
from . import halfdouble as hd
from .config_lp import LpSolution, build_and_solve, tighten
from .decomposition import EPS_DEFAULT, EPS_E_DEFAULT
from .instance import Instance, check_instance

BRANCHES = ("baseline", "halfdouble")


class _Allocator(BaseEstimator):
    _needs_decomposition = False

    def fit(self, X: Instance, y=None, solution: LpSolution = None):
        """Solve (or adopt ``solution``), tighten and precompute.

        Parameters
        ----------
        X : Instance
        y : ignored
        solution : LpSolution, optional
            A feasible solution of ``X``. It is tightened if needed, so it may
            come from a file written before or after tightening.
        """
        inst = check_instance(X)
        sol = build_and_solve(inst) if solution is None else solution
        sol, inst = tighten(sol, inst)
        self.instance_ = inst
        self.lp_ = sol
        self.bundle_ = bl.build_bundle(inst, sol)
        self.easy_ = bl.easy_check(self.bundle_, sol, self.eps)
        if self._needs_decomposition:
            self._decompose()
        self._prepare()
        return self

    def _decompose(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            self.decomposition_ = dc.compute(self.instance_, self.lp_, self.bundle_,
                                             self.eps, self.eps_e)

    def _prepare(self):
        pass

    def run(self, seed):
        raise NotImplementedError

    def predict(self, seeds) -> np.ndarray:
        check_is_fitted(self, "lp_")
        return np.array([self.run(s).reward for s in seeds], dtype=float)

    def score(self, seeds, y=None) -> float:
        lp = self.lp_.objective if hasattr(self, "lp_") else 0.0
        r = self.predict(seeds)
        return float(r.mean() / lp) if lp > 0 else 0.0


class BaselineAllocator(_Allocator):
    """Per-item reduction with optimal thresholds."""

    def __init__(self, eps: float = EPS_DEFAULT, eps_e: float = EPS_E_DEFAULT):
        self.eps = eps
        self.eps_e = eps_e

    def run(self, seed) -> bl.BaselineRun:
        check_is_fitted(self, "lp_")
        return bl.run_baseline(self.instance_, self.lp_, seed, self.bundle_)


class WeLargeAllocator(_Allocator):
    """Per-item reduction with the threshold-time policy on every item."""

    _needs_decomposition = True

    def __init__(self, eps: float = EPS_DEFAULT, eps_e: float = EPS_E_DEFAULT):
        self.eps = eps
        self.eps_e = eps_e

    def _prepare(self):
        pols = bl.welarge_policies(self.instance_, self.lp_, self.bundle_, self.decomposition_)
        self.t_indices_ = tuple(p.t_i for p in pols)
        self._accept = bl._welarge_table(self.bundle_, pols)

    def run(self, seed) -> bl.BaselineRun:
        check_is_fitted(self, "lp_")
        return bl.run_welarge_policy(self.instance_, self.lp_, self.decomposition_, seed,
                                     self.bundle_, self._accept)


class HalfDoubleAllocator(_Allocator):
    """Half-double sampling."""

    _needs_decomposition = True

    def __init__(self, eps: float = EPS_DEFAULT, eps_e: float = EPS_E_DEFAULT,
                 max_triples: int = hd.MAX_TRIPLES):
        self.eps = eps
        self.eps_e = eps_e
        self.max_triples = max_triples

    def _prepare(self):
        self.plan_ = hd.HalfDoublePlan(self.instance_, self.lp_, self.decomposition_,
                                       max_triples=self.max_triples)

    def run(self, seed) -> hd.HalfDoubleRun:
        check_is_fitted(self, "lp_")
        return hd.run_halfdouble(self.instance_, self.lp_, self.decomposition_, seed, self.plan_)


class CombinedRun:
    def __init__(self, branch: str, trace):
        self.branch = branch
        self.trace = trace
        self.reward = trace.reward


class CombinedAllocator(_Allocator):
    """Easy check, then a biased coin between the baseline and half-double sampling.

    Parameters
    ----------
    force : {None, "baseline", "halfdouble"}
        Skip the check and the coin and always take this branch.
    """

    def __init__(self, eps: float = EPS_DEFAULT, eps_e: float = EPS_E_DEFAULT,
                 max_triples: int = hd.MAX_TRIPLES, force=None):
        self.eps = eps
        self.eps_e = eps_e
        self.max_triples = max_triples
        self.force = force

    def _prepare(self):
        if self.force is not None and self.force not in BRANCHES:
            raise ValueError(f"force must be one of {BRANCHES} or None, got {self.force!r}")
        uses_hd = self.force == "halfdouble" or (self.force is None and not self.easy_)
        if uses_hd:
            self._decompose()
            self.plan_ = hd.HalfDoublePlan(self.instance_, self.lp_, self.decomposition_,
                                           max_triples=self.max_triples)

    @property
    def baseline_probability(self) -> float:
        """Probability of the baseline branch once the easy check has failed."""
        return 0.625 / (0.625 + self.eps_e)

    def choose_branch(self, u: float) -> str:
        check_is_fitted(self, "lp_")
        if self.force is not None:
            return self.force
        if self.easy_:
            return "baseline"
        return "baseline" if u < self.baseline_probability else "halfdouble"

    def run(self, seed) -> CombinedRun:
        check_is_fitted(self, "lp_")
        rng = np.random.default_rng(seed)
        branch = self.choose_branch(rng.random())
        sub = int(rng.integers(2 ** 63))
        if branch == "baseline":
            trace = bl.run_baseline(self.instance_, self.lp_, sub, self.bundle_)
        else:
            trace = hd.run_halfdouble(self.instance_, self.lp_, self.decomposition_, sub, self.plan_)
        return CombinedRun(branch, trace)


ALGORITHMS = {
    "baseline": BaselineAllocator,
    "welarge": WeLargeAllocator,
    "halfdouble": HalfDoubleAllocator,
    "combined": CombinedAllocator,
}
