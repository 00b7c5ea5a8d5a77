"""Half-double sampling for instances whose early free weight is small.

A random half ``Q`` of the items is handed out only through the late free
parts of two independent column samples ``A`` and ``B``. The other half runs
the per-item reduction against ``f_t = v_t(· | S^F_t)``, with each item's
stopping problem built for the sampled ``Q``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .baseline import ColumnSampler, _draw
from .config_lp import LpSolution, require_tight
from .decomposition import FreeDetDecomposition
from .instance import Instance
from .prophet import PiInstance, optimal_thresholds

MAX_TRIPLES = 10 ** 6
MC_SAMPLES = 10 ** 5
MC_ALPHA = 1e-3
CACHE_MAX = 10 ** 6
TIE_TOL = 1e-12


@dataclass
class HalfDoubleStep:
    k: int
    A: frozenset
    B: frozenset
    A_F: frozenset
    B_F: frozenset
    S_F: frozenset
    S_req: frozenset
    S_get: frozenset
    S: frozenset
    R: frozenset
    f_req: float
    f_get: float


@dataclass
class HalfDoubleRun:
    """Trace of one run; ``steps[t].R`` is the remaining set before agent ``t``."""

    Q: frozenset
    steps: list
    reward: float
    info: dict = field(default_factory=dict)

    @property
    def f_req(self) -> float:
        return sum(s.f_req for s in self.steps)

    @property
    def f_get(self) -> float:
        return sum(s.f_get for s in self.steps)

    def to_dict(self) -> dict:
        def items(s):
            return sorted(i + 1 for i in s)
        return {
            "Q": items(self.Q),
            "reward": self.reward,
            "steps": [
                {"t": t + 1, "k": s.k + 1, "A": items(s.A), "B": items(s.B),
                 "A_F": items(s.A_F), "B_F": items(s.B_F), "S_F": items(s.S_F),
                 "S_req": items(s.S_req), "S_get": items(s.S_get), "S": items(s.S),
                 "R": items(s.R)}
                for t, s in enumerate(self.steps)
            ],
            "info": self.info,
        }


class HalfDoublePlan:
    """Everything about a run that does not depend on ``Q``.

    Parameters
    ----------
    inst, sol, dec
        The tightened instance, its tight solution and a decomposition of it.
    max_triples : int
        Above this many ``(k, A, B)`` triples at a step, that step's item
        distributions are estimated from ``mc_samples`` draws.
    """

    def __init__(self, inst: Instance, sol: LpSolution, dec: FreeDetDecomposition,
                 max_triples: int = MAX_TRIPLES, mc_samples: int = MC_SAMPLES):
        require_tight(sol)
        unknown = [key for key in dec.FR if (key[0], key[1], key[2]) not in sol.entries
                   or key[3] not in key[2]]
        if unknown:
            raise ValueError(f"decomposition has tuples not in the solution, e.g. {unknown[0]}")
        self.inst = inst
        self.sol = sol
        self.dec = dec
        self.sampler = ColumnSampler(inst, sol)
        self.max_triples = max_triples
        self.mc_samples = mc_samples
        self.free = {}
        for (t, k), cols in self.sampler.cols.items():
            for ci, S in enumerate(cols):
                self.free[(t, k, ci)] = frozenset(i for i in S if (t, k, S, i) in dec.FR_L)
        self.triples = [sum(len(self.sampler.cols[(t, k)]) ** 2 for k in self.sampler.type_ids[t])
                        for t in range(inst.T)]
        self._marg = {}

    def marginals(self, t: int, k: int, req: frozenset, given: frozenset) -> dict:
        key = (t, k, req, given)
        hit = self._marg.get(key)
        if hit is None:
            if req:
                hit = self.inst.agents[t][k].valuation.marginals(req, given=given)
            else:
                hit = {}
            if len(self._marg) >= CACHE_MAX:
                self._marg.clear()
            self._marg[key] = hit
        return hit

    def _exact_step(self, t: int, Q: frozenset, acc: list) -> None:
        for k in self.sampler.type_ids[t]:
            p = self.inst.agents[t][k].p
            cols = self.sampler.cols[(t, k)]
            xs = self.sampler.col_x[(t, k)]
            groups = {}
            for ci, x in enumerate(xs):
                c_b = Q & self.free[(t, k, ci)]
                groups[c_b] = groups.get(c_b, 0.0) + x
            for ci, (A, xa) in enumerate(zip(cols, xs)):
                req = A - Q
                if not req:
                    continue
                c_a = Q & self.free[(t, k, ci)]
                for c_b, xb in groups.items():
                    prob = xa * xb / p
                    for i, w in self.marginals(t, k, req, c_a | c_b).items():
                        d = acc[i]
                        d[w] = d.get(w, 0.0) + prob

    def _sampled_step(self, t: int, Q: frozenset, acc: list, rng: np.random.Generator) -> float:
        n = self.mc_samples
        u = rng.random((n, 3))
        vmax = 0.0
        for a, b, c in u:
            k = self.sampler.type_of(t, a)
            ia = self.sampler.column_of(t, k, b)
            ib = self.sampler.column_of(t, k, c)
            A = self.sampler.cols[(t, k)][ia]
            req = A - Q
            if not req:
                continue
            given = Q & (self.free[(t, k, ia)] | self.free[(t, k, ib)])
            for i, w in self.marginals(t, k, req, given).items():
                d = acc[i]
                d[w] = d.get(w, 0.0) + 1.0 / n
                vmax = max(vmax, w)
        return vmax * math.sqrt(math.log(2 / MC_ALPHA) / (2 * n))

    def item_problems(self, Q: frozenset, rng: np.random.Generator = None):
        """Stopping problem of every item for this ``Q`` (empty for items in ``Q``).

        Returns the problems and an info dict listing any estimated steps with
        a Hoeffding bound, at confidence ``1 - 1e-3``, on each estimated
        step's expected value.
        """
        m = self.inst.m
        steps = [[None] * self.inst.T for _ in range(m)]
        info = {"estimated_steps": [], "error_bounds": []}
        for t in range(self.inst.T):
            acc = [dict() for _ in range(m)]
            if self.triples[t] <= self.max_triples:
                self._exact_step(t, Q, acc)
            else:
                if rng is None:
                    rng = np.random.default_rng(0)
                info["estimated_steps"].append(t)
                info["error_bounds"].append(self._sampled_step(t, Q, acc, rng))
            for i in range(m):
                steps[i][t] = sorted(acc[i].items()) if i not in Q else []
        return [PiInstance(s) for s in steps], info

    def thresholds(self, Q: frozenset, rng: np.random.Generator = None):
        pis, info = self.item_problems(Q, rng)
        return [optimal_thresholds(pi)[0].tau for pi in pis], info


def run_halfdouble(inst: Instance, sol: LpSolution, dec: FreeDetDecomposition, seed,
                   plan: HalfDoublePlan = None) -> HalfDoubleRun:
    """One run of half-double sampling; returns the full trace."""
    if plan is None:
        plan = HalfDoublePlan(inst, sol, dec)
    elif plan.sol is not sol or plan.dec is not dec:
        raise ValueError("plan was built for a different solution or decomposition")
    rng = np.random.default_rng(seed)
    m, T = inst.m, inst.T
    Q = frozenset(int(i) for i in np.flatnonzero(rng.random(m) < 0.5))
    u = rng.random(3 * T)
    taus, info = plan.thresholds(Q, rng)
    sampler = plan.sampler
    R = set(range(m))
    steps = []
    reward = 0.0
    for t in range(T):
        k = sampler.type_of(t, u[3 * t])
        ia = _draw(sampler.col_cum[(t, k)], u[3 * t + 1])
        ib = _draw(sampler.col_cum[(t, k)], u[3 * t + 2])
        A = sampler.cols[(t, k)][ia]
        B = sampler.cols[(t, k)][ib]
        A_F, B_F = plan.free[(t, k, ia)], plan.free[(t, k, ib)]
        S_F = Q & (A_F | B_F)
        S_req = A - Q
        ws = plan.marginals(t, k, S_req, S_F)
        got = []
        for i, w in ws.items():
            tau = taus[i][t]
            if w > 0 and i in R and w >= tau - TIE_TOL * max(1.0, tau):
                got.append(i)
        S_get = frozenset(got)
        S = frozenset(S_F & R) | S_get
        R_before = frozenset(R)
        R -= S
        v = inst.agents[t][k].valuation
        base = v._value(S_F) if S_F else 0.0
        f_req = v._value(S_req | S_F) - base if S_req else 0.0
        f_get = v._value(S_get | S_F) - base if S_get else 0.0
        if S:
            reward += v._value(S)
        steps.append(HalfDoubleStep(k, A, B, A_F, B_F, S_F, S_req, S_get, S, R_before, f_req, f_get))
    return HalfDoubleRun(Q, steps, reward, info)


# --------------------------------------------------------------------- audits

def fr_mass(inst: Instance, sol: LpSolution, dec: FreeDetDecomposition) -> np.ndarray:
    """Per item, total ``x`` over its free tuples."""
    out = np.zeros(inst.m)
    for (t, k, S, i) in dec.FR:
        out[i] += sol.entries.get((t, k, S), 0.0)
    return out


@dataclass(frozen=True)
class AvailabilityAudit:
    availability: np.ndarray
    counts: np.ndarray
    bound: np.ndarray
    min_margin: float
    passed: bool


def audit_free_item_availability(runs, inst: Instance, sol: LpSolution, dec: FreeDetDecomposition,
                             min_runs: int = 10 ** 4) -> AvailabilityAudit:
    """Empirical ``Pr[i ∈ R_t | i ∈ Q]`` against ``1 - 4 · (free mass of i)``.

    The factor 4 is the union bound over two samples per agent, applied to
    the instance's actual free mass. Each cell passes when the estimate is at
    least the bound minus three standard errors.
    """
    runs = list(runs)
    if len(runs) < min_runs:
        raise ValueError(f"need at least {min_runs} runs, got {len(runs)}")
    m, T = inst.m, inst.T
    in_q = np.zeros(m)
    avail = np.zeros((T, m))
    for run in runs:
        q = np.zeros(m, dtype=bool)
        q[list(run.Q)] = True
        in_q += q
        for t, s in enumerate(run.steps):
            r = np.zeros(m, dtype=bool)
            r[list(s.R)] = True
            avail[t] += r & q
    n = np.maximum(in_q, 1)
    est = avail / n
    bound = np.broadcast_to(1 - 4 * fr_mass(inst, sol, dec), (T, m))
    se = np.sqrt(est * (1 - est) / n)
    margin = est - bound + 3 * se
    margin = margin[:, in_q > 0]
    min_margin = float(margin.min()) if margin.size else 0.0
    return AvailabilityAudit(est, in_q, np.array(bound), min_margin, min_margin >= 0)


def audit_late_free_request_prob(inst: Instance, sol: LpSolution, dec: FreeDetDecomposition) -> dict:
    """Exact ``Pr[i ∈ A^F]`` for every ``(t, k, i)`` with a late free tuple.

    Returns ``{"probs": {(t, k, i): prob}, "max": float, "pass": bool}``
    where the check is ``max <= eps_E + 1e-12``.
    """
    probs = {}
    for (t, k, S, i) in dec.FR_L:
        p = inst.agents[t][k].p
        probs[(t, k, i)] = probs.get((t, k, i), 0.0) + sol.entries[(t, k, S)] / p
    top = max(probs.values(), default=0.0)
    return {"probs": probs, "max": top, "pass": top <= dec.eps_E + 1e-12}


def check_half_requested_value(runs) -> dict:
    """Mean ``Σ f_t(S^get)`` against half of mean ``Σ f_t(S^req)``, with a 3σ allowance."""
    d = np.array([r.f_get - 0.5 * r.f_req for r in runs])
    se = d.std(ddof=1) / math.sqrt(len(d)) if len(d) > 1 else 0.0
    return {"mean_get": float(np.mean([r.f_get for r in runs])),
            "mean_req": float(np.mean([r.f_req for r in runs])),
            "margin": float(d.mean() + 3 * se),
            "pass": bool(d.mean() + 3 * se >= 0)}


def halfdouble_lower_bound(inst: Instance, sol: LpSolution, dec: FreeDetDecomposition) -> float:
    """``(0.5625 - eps_E/8 - 6.5 q) · LP - 0.625 · W_E`` with ``q`` the largest per-item free mass."""
    mass = fr_mass(inst, sol, dec)
    q = float(mass.max()) if mass.size else 0.0
    return (0.5625 - dec.eps_E / 8 - 6.5 * q) * sol.objective - 0.625 * dec.W_E
