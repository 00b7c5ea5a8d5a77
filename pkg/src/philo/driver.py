"""Combined algorithm, exact optimal-online values, gap experiments and Monte Carlo.

Monte Carlo trial ``i`` of master seed ``s`` always uses
``SeedSequence(entropy=s, spawn_key=(i,))``, so reports do not depend on how
trials are split across workers. ``PHILO_THREADS`` caps the worker count.
"""
from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .config_lp import build_and_solve, feasible_solution_xos
from .decomposition import EPS_DEFAULT, EPS_E_DEFAULT
from .estimators import ALGORITHMS, CombinedAllocator, CombinedRun
from .exceptions import TooLarge
from .instance import Instance, check_instance, gen_xos_hard, _inverse_integer

DP_MAX_M = 10
DP_MAX_WORK = 10 ** 8
SYMMETRIC_MAX_M = 64


def run_combined(inst: Instance, seed, eps: float = EPS_DEFAULT, eps_E: float = EPS_E_DEFAULT,
                 force: Optional[str] = None) -> CombinedRun:
    """Solve, tighten, check and dispatch once; reuse a fitted
    :class:`~philo.estimators.CombinedAllocator` for repeated runs."""
    return CombinedAllocator(eps=eps, eps_e=eps_E, force=force).fit(inst).run(seed)


# ------------------------------------------------------------ optimal online

def _submask_pairs(m: int):
    """All ``(R, S)`` with ``S ⊆ R``, grouped by ``R``; returns arrays and group starts."""
    rs, ss = [], []
    for R in range(1 << m):
        S = R
        while True:
            rs.append(R)
            ss.append(S)
            if S == 0:
                break
            S = (S - 1) & R
    return np.array(rs, dtype=np.int64), np.array(ss, dtype=np.int64)


def opt_online_dp(inst: Instance) -> float:
    """Exact value of the best online algorithm by backward recursion over remaining sets."""
    check_instance(inst)
    m = inst.m
    n_types = sum(1 for _, _, ty in inst.types() if ty.p > 0)
    if m > DP_MAX_M or n_types * 3 ** m > DP_MAX_WORK:
        raise TooLarge(f"optimal-online DP needs m <= {DP_MAX_M} and "
                       f"types * 3^m <= {DP_MAX_WORK:.0e} (m={m}, types={n_types})")
    R, S = _submask_pairs(m)
    starts = np.flatnonzero(np.r_[True, R[1:] != R[:-1]])
    rest = R ^ S
    V = np.zeros(1 << m)
    for agent in reversed(inst.agents):
        nxt = np.zeros(1 << m)
        cont = V[rest]
        for ty in agent:
            if ty.p <= 0:
                continue
            best = np.maximum.reduceat(ty.valuation.table[S] + cont, starts)
            nxt += ty.p * best
        V = nxt
    return float(V[(1 << m) - 1])


def expected_max_block(delta: float, r: int) -> Fraction:
    """``E[max_j |U_j ∩ R|]`` for ``|R| = r`` and a uniform random equipartition.

    Counted through ``Pr[max < a]``: the number of ``r``-subsets meeting every
    block in fewer than ``a`` items is the ``z^r`` coefficient of
    ``(Σ_{k<a} C(s, k) z^k)^b``.
    """
    b = _inverse_integer(delta)
    s = b * b
    m = b * s
    if not (0 <= r <= m):
        raise ValueError(f"r must lie in [0, {m}], got {r}")
    total = math.comb(m, r)
    expect = Fraction(0)
    for a in range(1, s + 1):
        poly = [1]
        base = [math.comb(s, k) for k in range(a)]
        for _ in range(b):
            out = [0] * (len(poly) + len(base) - 1)
            for i, c in enumerate(poly):
                if c:
                    for j, d in enumerate(base):
                        out[i + j] += c * d
            poly = out
        below = poly[r] if r < len(poly) else 0
        tail = Fraction(total - below, total)
        if tail == 0:
            break
        expect += tail
    return expect


def terminal_value(delta: float, r: int) -> float:
    """Expected value of handing ``r`` remaining items to the partition agent."""
    return float(_inverse_integer(delta) * expected_max_block(delta, r))


def opt_online_xos_symmetric(delta: float) -> float:
    """Optimal online value of the XOS hard instance via a DP over kept-item counts.

    Agent ``t`` arrives with probability ``1 - δ`` and either takes its item
    (value 1) or leaves it for the last agent, whose expected value depends
    only on how many items are left.
    """
    n = _inverse_integer(delta)
    m = n ** 3
    if m > SYMMETRIC_MAX_M:
        raise TooLarge(f"symmetric DP needs m <= {SYMMETRIC_MAX_M}, got m={m}")
    d = 1.0 / n
    V = np.array([terminal_value(d, r) for r in range(m + 1)])
    for t in range(m, 0, -1):
        nxt = np.empty(t)
        for r in range(t):
            keep = V[r + 1]
            nxt[r] = (1 - d) * max(1.0 + V[r], keep) + d * keep
        V = nxt
    return float(V[0])


# -------------------------------------------------------------------- reports

@dataclass
class ExperimentReport:
    instance: str
    lp_value: float
    opt_online: Optional[float] = None
    algorithms: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def gap_report(deltas: Sequence[float]) -> list:
    """Optimal online value against the LP value of the explicit feasible point.

    For ``δ = 1/2`` the LP value is read off the enumerated feasible point; for
    smaller ``δ`` the partition count is far too large to enumerate and the
    closed form ``m (2 - δ)`` of the same point is used.
    """
    reports = []
    for delta in deltas:
        start = time.perf_counter()
        n = _inverse_integer(delta)
        m = n ** 3
        try:
            inst = gen_xos_hard(1.0 / n)
            lp = feasible_solution_xos(inst).objective
            source = "feasible point"
        except TooLarge:
            lp = m * (2 - 1.0 / n)
            source = "closed form"
        opt = opt_online_xos_symmetric(1.0 / n)
        reports.append(ExperimentReport(
            instance=f"xos-hard(delta=1/{n})",
            lp_value=lp,
            opt_online=opt,
            algorithms={"optimal-online": {"mean": opt, "stderr": 0.0, "trials": 0,
                                           "ratio_to_lp": opt / lp}},
            parameters={"delta": 1.0 / n, "m": m, "lp_source": source},
            wall_time=time.perf_counter() - start,
        ))
    return reports


def gap_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", "m", "lp_value", "opt_online", "ratio"])
    for r in reports:
        w.writerow([r.parameters["delta"], r.parameters["m"], r.lp_value, r.opt_online,
                    r.opt_online / r.lp_value])
    return buf.getvalue()


def trial_seed(master_seed: int, i: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(i,))


def _worker_count() -> int:
    raw = os.environ.get("PHILO_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _chunk(model, master_seed: int, lo: int, hi: int) -> np.ndarray:
    return model.predict([trial_seed(master_seed, i) for i in range(lo, hi)])


def monte_carlo_rewards(model, trials: int, master_seed: int) -> np.ndarray:
    """Rewards of ``trials`` runs of a fitted allocator, in trial order."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    workers = min(_worker_count(), trials)
    if workers == 1:
        return _chunk(model, master_seed, 0, trials)
    bounds = np.linspace(0, trials, workers + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = ex.map(_chunk, [model] * workers, [master_seed] * workers,
                       bounds[:-1].tolist(), bounds[1:].tolist())
        return np.concatenate(list(parts))


def monte_carlo(alg, inst: Instance, trials: int, master_seed: int, eps: float = EPS_DEFAULT,
                eps_e: float = EPS_E_DEFAULT, solution=None, **params) -> ExperimentReport:
    """Fit ``alg`` (a name or an unfitted allocator) and report mean reward over ``trials`` runs."""
    start = time.perf_counter()
    if isinstance(alg, str):
        if alg not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {alg!r}")
        name = alg
        model = ALGORITHMS[alg](eps=eps, eps_e=eps_e, **params)
    else:
        name = type(alg).__name__
        model = alg
    model.fit(inst, solution=solution)
    rewards = monte_carlo_rewards(model, trials, master_seed)
    lp = model.lp_.objective
    mean = float(rewards.mean())
    stderr = float(rewards.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return ExperimentReport(
        instance=inst.name,
        lp_value=lp,
        algorithms={name: {"mean": mean, "stderr": stderr, "trials": trials,
                           "ratio_to_lp": mean / lp if lp > 0 else 0.0}},
        parameters={"eps": model.eps, "eps_e": model.eps_e, "seed": master_seed, **params},
        wall_time=time.perf_counter() - start,
    )
