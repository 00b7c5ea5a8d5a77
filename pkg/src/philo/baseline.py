"""Reduction of the allocation instance to one stopping problem per item.

Every LP column ``(t, k, S)`` becomes, for each ``i ∈ S``, an atom of value
``w_{t,k,S}(i)`` and probability ``x[t,k,S]`` at step ``t`` of item ``i``'s
problem. Online, each agent samples a requested bundle from its realised
type's column distribution and receives the items whose problems accept.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .config_lp import TIGHT_TOL, LpSolution, require_tight
from .exceptions import NotTight
from .instance import Instance
from .prophet import Atom, OptimalThresholds, PiInstance, TiPolicy, optimal_thresholds

EASY_TOL = 1e-12


def _cumulative(weights) -> list:
    out, acc = [], 0.0
    for w in weights:
        acc += w
        out.append(acc)
    return out


def _draw(cum: list, u: float) -> int:
    j = bisect_right(cum, u * cum[-1])
    return min(j, len(cum) - 1)


class ColumnSampler:
    """Per-agent type distribution and per-type column distribution ``x / p``.

    Column mass of each type must match ``p`` to within ``1e-7`` relative; the
    remaining float drift is renormalised away.
    """

    def __init__(self, inst: Instance, sol: LpSolution):
        require_tight(sol)
        self.T = inst.T
        self.type_cum = []
        self.type_ids = []
        self.cols = {}
        self.col_x = {}
        self.col_cum = {}
        grouped = {}
        for (t, k, S), x in sol.entries.items():
            grouped.setdefault((t, k), []).append((S, x))
        for t, agent in enumerate(inst.agents):
            ids = [k for k, ty in enumerate(agent) if ty.p > 0]
            self.type_ids.append(ids)
            self.type_cum.append(_cumulative([agent[k].p for k in ids]))
            for k in ids:
                p = agent[k].p
                pairs = sorted(grouped.get((t, k), []), key=lambda sx: (len(sx[0]), sorted(sx[0])))
                total = sum(x for _, x in pairs)
                if abs(total - p) > TIGHT_TOL * max(1.0, p):
                    raise NotTight(f"agent {t + 1} type {k + 1}: column mass {total} differs from p={p}")
                self.cols[(t, k)] = [S for S, _ in pairs]
                self.col_x[(t, k)] = [x for _, x in pairs]
                self.col_cum[(t, k)] = _cumulative(self.col_x[(t, k)])

    def type_of(self, t: int, u: float) -> int:
        return self.type_ids[t][_draw(self.type_cum[t], u)]

    def column_of(self, t: int, k: int, u: float) -> int:
        return _draw(self.col_cum[(t, k)], u)


@dataclass
class BaselineBundle:
    """Per-item stopping problems built from a tight LP solution.

    Attributes
    ----------
    pis : tuple of PiInstance
        Item ``i``'s problem; atoms are tagged ``(k, S)`` and sit at step ``t``.
    policies : tuple of OptimalThresholds
    opt_values : tuple of float
        Optimal value of each item's problem.
    opt_sum : float
    marginals : dict
        ``(t, k, column index) -> ((i, w), ...)`` over items of the column.
    """

    pis: tuple
    policies: tuple
    opt_values: tuple
    opt_sum: float
    sampler: ColumnSampler
    marginals: dict
    accept: dict = field(repr=False)


def build_bundle(inst: Instance, sol: LpSolution) -> BaselineBundle:
    sampler = ColumnSampler(inst, sol)
    steps = [[[] for _ in range(inst.T)] for _ in range(inst.m)]
    marginals = {}
    for (t, k), cols in sampler.cols.items():
        v = inst.agents[t][k].valuation
        for ci, S in enumerate(cols):
            x = sampler.col_x[(t, k)][ci]
            ws = tuple(sorted(v.marginals(S).items())) if S else ()
            marginals[(t, k, ci)] = ws
            for i, w in ws:
                steps[i][t].append(Atom(float(w), x, (k, S)))
    pis, policies, opts = [], [], []
    for i in range(inst.m):
        pi = PiInstance(steps[i])
        pol, opt = optimal_thresholds(pi)
        pis.append(pi)
        policies.append(pol)
        opts.append(opt)
    accept = {}
    for key, ws in marginals.items():
        t = key[0]
        accept[key] = tuple(i for i, w in ws if w > 0 and policies[i].accepts(t, Atom(w, 0.0)))
    return BaselineBundle(tuple(pis), tuple(policies), tuple(opts), float(sum(opts)),
                          sampler, marginals, accept)


def easy_check(bundle: BaselineBundle, sol: LpSolution, eps: float) -> bool:
    """Whether the per-item optima already reach ``(0.5 + eps)`` of the LP value."""
    target = (0.5 + eps) * sol.objective
    return bundle.opt_sum >= target - EASY_TOL * max(1.0, abs(target))


@dataclass
class BaselineRun:
    types: list
    requested: list
    allocated: list
    reward: float
    pi_value: float


def _run_table(inst: Instance, bundle: BaselineBundle, accept: dict, seed) -> BaselineRun:
    rng = np.random.default_rng(seed)
    u = rng.random(2 * inst.T)
    sampler = bundle.sampler
    taken = set()
    types, requested, allocated = [], [], []
    reward = pi_value = 0.0
    for t in range(inst.T):
        k = sampler.type_of(t, u[2 * t])
        ci = sampler.column_of(t, k, u[2 * t + 1])
        S = sampler.cols[(t, k)][ci]
        got = frozenset(i for i in accept[(t, k, ci)] if i not in taken)
        taken |= got
        types.append(k)
        requested.append(S)
        allocated.append(got)
        if got:
            reward += inst.agents[t][k].valuation._value(got)
            pi_value += sum(w for i, w in bundle.marginals[(t, k, ci)] if i in got)
    return BaselineRun(types, requested, allocated, reward, pi_value)


def run_baseline(inst: Instance, sol: LpSolution, seed, bundle: BaselineBundle = None) -> BaselineRun:
    """One run of the per-item reduction with the optimal thresholds.

    Items whose prefix marginal is 0 are never offered, which is equivalent to
    offering them since the thresholds never accept 0.
    """
    if bundle is None:
        bundle = build_bundle(inst, sol)
    return _run_table(inst, bundle, bundle.accept, seed)


def t_indices(inst: Instance, sol: LpSolution, eps_e: float) -> tuple:
    """Per item, the last agent ``t`` whose tail mass ``Σ_{s>=t} Σ_{S∋i} x`` is at least ``eps_e``."""
    per_agent = np.zeros((inst.T, inst.m))
    for (t, _, S), x in sol.entries.items():
        for i in S:
            per_agent[t, i] += x
    tail = np.cumsum(per_agent[::-1], axis=0)[::-1]
    out = []
    for i in range(inst.m):
        idx = np.flatnonzero(tail[:, i] >= eps_e - 1e-12)
        out.append(int(idx[-1]) if idx.size else 0)
    return tuple(out)


def welarge_policies(inst: Instance, sol: LpSolution, bundle: BaselineBundle, decomposition) -> tuple:
    """The threshold-time policy of every item: free tuples only before ``t_i``, anything after."""
    t_i = t_indices(inst, sol, decomposition.eps_E)
    free = [set() for _ in range(inst.m)]
    for (t, k, S, i) in decomposition.FR:
        free[i].add((t, (k, S)))
    return tuple(TiPolicy(t_i[i], frozenset(free[i])) for i in range(inst.m))


def _welarge_table(bundle: BaselineBundle, policies: tuple) -> dict:
    accept = {}
    for (t, k, ci), ws in bundle.marginals.items():
        S = bundle.sampler.cols[(t, k)][ci]
        accept[(t, k, ci)] = tuple(i for i, w in ws
                                   if policies[i].accepts(t, Atom(w, 0.0, (k, S))))
    return accept


def run_welarge_policy(inst: Instance, sol: LpSolution, decomposition, seed,
                       bundle: BaselineBundle = None, accept: dict = None) -> BaselineRun:
    """One run of the reduction with the threshold-time policy on every item."""
    if decomposition is None:
        raise ValueError("run_welarge_policy needs a decomposition")
    if bundle is None:
        bundle = build_bundle(inst, sol)
    if accept is None:
        accept = _welarge_table(bundle, welarge_policies(inst, sol, bundle, decomposition))
    return _run_table(inst, bundle, accept, seed)
