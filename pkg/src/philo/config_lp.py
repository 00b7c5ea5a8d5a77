"""The online configuration LP: build, solve, tighten and audit.

Variables ``x[t, k, S]`` range over the declared family of each type. The LP
maximises ``Σ v_{t,k}(S) x`` subject to

* item mass: ``Σ_{t,k,S∋i} x <= 1`` for every item,
* type mass: ``Σ_S x[t,k,S] <= p_{t,k}``,
* online: ``p_{t,k} Σ_{t'<t,k',S∋i} x + Σ_{S∋i} x[t,k,S] <= p_{t,k}``.

The last row is the availability constraint written linearly. Columns for the
empty set have zero value and appear in no row but the type-mass one, so they
are left out of the solve and only reintroduced by :func:`tighten`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import InstanceError, NotTight
from .instance import EMPTY, AgentType, Instance, check_instance
from .simplex import simplex_max
from .valuations import zero_valuation

FEAS_TOL = 1e-7
TIGHT_TOL = 1e-7
GAP_TOL = 1e-7
MAX_COLUMNS = 100_000
ENTRY_TOL = 1e-12


@dataclass(frozen=True)
class LpSolution:
    """Sparse LP point ``(t, k, S) -> x``, 0-based agent/type indices.

    ``appended`` lists the items whose residual mass was routed to an extra
    zero-value agent by :func:`tighten`, in the order those agents were added.
    """

    entries: dict
    objective: float
    per_item: tuple
    tight: bool = False
    appended: tuple = ()
    info: dict = field(default_factory=dict, compare=False)

    def x(self, t: int, k: int, S) -> float:
        return self.entries.get((t, k, frozenset(S)), 0.0)

    def columns_of(self, t: int, k: int) -> list:
        """Nonzero ``(S, x)`` pairs of type ``(t, k)`` in a deterministic order."""
        out = [(S, x) for (tt, kk, S), x in self.entries.items() if tt == t and kk == k]
        out.sort(key=lambda sx: (len(sx[0]), sorted(sx[0])))
        return out

    def item_mass(self, m: int) -> np.ndarray:
        mass = np.zeros(m)
        for (_, _, S), x in self.entries.items():
            for i in S:
                mass[i] += x
        return mass


def _dedupe(family) -> list:
    seen = set()
    out = []
    for s in family:
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def _item_values(inst: Instance, entries: dict) -> tuple:
    per_item = np.zeros(inst.m)
    for (t, k, S), x in entries.items():
        if not S:
            continue
        v = inst.agents[t][k].valuation
        for i, w in v.marginals(S).items():
            per_item[i] += x * w
    return tuple(float(a) for a in per_item)


def _objective(inst: Instance, entries: dict) -> float:
    return float(sum(inst.agents[t][k].valuation._value(S) * x
                     for (t, k, S), x in entries.items() if S))


def make_solution(inst: Instance, entries: dict, tight: bool = False,
                  appended: tuple = (), info: Optional[dict] = None) -> LpSolution:
    """Wrap raw entries, recomputing the objective and the per-item split."""
    clean = {(int(t), int(k), frozenset(S)): float(x)
             for (t, k, S), x in entries.items() if x > ENTRY_TOL}
    return LpSolution(
        entries=clean,
        objective=_objective(inst, clean),
        per_item=_item_values(inst, clean),
        tight=tight,
        appended=tuple(appended),
        info=dict(info or {}),
    )


def build_lp(inst: Instance):
    """Assemble ``(c, A, b, columns, row_labels)`` for the solve.

    Rows that cannot bind are pruned: item-mass rows of items no column
    touches, and online rows of ``(t, k, i)`` where the type itself has no
    column containing ``i``.
    """
    columns = []
    for t, k, ty in inst.types():
        if ty.p <= 0.0:
            continue
        for S in _dedupe(ty.family):
            if S:
                columns.append((t, k, S))
    n = len(columns)
    if n > MAX_COLUMNS:
        raise InstanceError([f"LP has {n} columns, more than {MAX_COLUMNS}"])

    c = np.array([inst.agents[t][k].valuation._value(S) for t, k, S in columns])
    rows, b, labels = [], [], []

    item_cols = [[] for _ in range(inst.m)]
    for j, (_, _, S) in enumerate(columns):
        for i in S:
            item_cols[i].append(j)
    for i in range(inst.m):
        if item_cols[i]:
            rows.append({j: 1.0 for j in item_cols[i]})
            b.append(1.0)
            labels.append(("item", i))

    by_type = {}
    for j, (t, k, _) in enumerate(columns):
        by_type.setdefault((t, k), []).append(j)
    for (t, k), js in by_type.items():
        rows.append({j: 1.0 for j in js})
        b.append(inst.agents[t][k].p)
        labels.append(("type", t, k))

    for (t, k), js in by_type.items():
        p = inst.agents[t][k].p
        own_items = sorted(set().union(*(columns[j][2] for j in js)))
        for i in own_items:
            row = {}
            for j in item_cols[i]:
                tt = columns[j][0]
                if tt < t:
                    row[j] = row.get(j, 0.0) + p
                elif tt == t and columns[j][1] == k:
                    row[j] = row.get(j, 0.0) + 1.0
            rows.append(row)
            b.append(p)
            labels.append(("online", t, k, i))

    A = np.zeros((len(rows), n))
    for r, row in enumerate(rows):
        for j, a in row.items():
            A[r, j] = a
    return c, A, np.array(b, dtype=float), columns, labels


def build_and_solve(inst: Instance) -> LpSolution:
    """Optimal LP solution restricted to the declared families.

    The returned ``info`` records the pivot count and the relative duality
    gap of the final basis; a gap above ``1e-7`` is reported as a failure.
    """
    check_instance(inst)
    c, A, b, columns, _ = build_lp(inst)
    if not columns:
        return make_solution(inst, {}, info={"pivots": 0, "gap": 0.0})
    res = simplex_max(c, A, b)
    if res.gap > GAP_TOL or res.max_reduced_cost > 1e-7 or np.any(res.dual < -1e-7):
        raise ArithmeticError(
            f"simplex failed to certify optimality (gap={res.gap:.3g}, "
            f"max reduced cost={res.max_reduced_cost:.3g})")
    entries = {col: x for col, x in zip(columns, res.x)}
    return make_solution(inst, entries, info={"pivots": res.pivots, "gap": res.gap})


def is_tight(sol: LpSolution, inst: Instance, tol: float = TIGHT_TOL) -> bool:
    """Whether item mass is 1 for every item and type mass is ``p`` for every type."""
    mass = sol.item_mass(inst.m)
    if np.any(np.abs(mass - 1.0) > tol):
        return False
    tmass = {}
    for (t, k, _), x in sol.entries.items():
        tmass[(t, k)] = tmass.get((t, k), 0.0) + x
    return all(abs(tmass.get((t, k), 0.0) - ty.p) <= tol
               for t, k, ty in inst.types() if ty.p > 0)


def tighten(sol: LpSolution, inst: Instance):
    """Make item and type mass constraints tight without changing the objective.

    For every item with residual mass ``r > 1e-12`` a deterministic zero-value
    agent with family ``{∅, {i}}`` is appended and given ``x = r`` on ``{i}``;
    every type then has its empty-set column padded up to ``p``. Returns the new
    solution and the (possibly extended) instance.
    """
    if sol.tight:
        return sol, inst
    if is_tight(sol, inst):
        return make_solution(inst, sol.entries, tight=True, appended=sol.appended,
                             info=sol.info), inst
    entries = dict(sol.entries)
    residual = 1.0 - sol.item_mass(inst.m)
    extra, appended = [], []
    zero = zero_valuation(inst.m)
    for i in range(inst.m):
        if residual[i] > ENTRY_TOL:
            t = inst.T + len(extra)
            extra.append((AgentType(1.0, zero, (EMPTY, frozenset([i]))),))
            appended.append(i)
            entries[(t, 0, frozenset([i]))] = float(residual[i])
    new_inst = inst.with_agents(extra) if extra else inst

    tmass = {}
    for (t, k, _), x in entries.items():
        tmass[(t, k)] = tmass.get((t, k), 0.0) + x
    for t, k, ty in new_inst.types():
        if ty.p <= 0:
            continue
        pad = ty.p - tmass.get((t, k), 0.0)
        if pad > ENTRY_TOL:
            key = (t, k, EMPTY)
            entries[key] = entries.get(key, 0.0) + pad
    return make_solution(new_inst, entries, tight=True,
                         appended=tuple(sol.appended) + tuple(appended), info=sol.info), new_inst


def require_tight(sol: LpSolution) -> None:
    if not sol.tight:
        raise NotTight("this operation needs a tightened LP solution; call tighten first")


def feasible_solution_xos(inst: Instance) -> LpSolution:
    """The explicit feasible point for the XOS hard instance.

    Agent ``t < m`` gets ``x = 1 - δ`` on ``{t}`` and every block of every
    partition type of the last agent gets ``x = δ / N``.
    """
    m = inst.m
    if inst.T != m + 1:
        raise ValueError(f"expected {m + 1} agents for an XOS hard instance, got {inst.T}")
    last = inst.agents[-1]
    n_types = len(last)
    blocks = [b for b in last[0].family if b]
    if not blocks or any(len(ty.family) - 1 != len(blocks) for ty in last):
        raise ValueError("last agent does not have the partition-type shape")
    delta = 1.0 / len(blocks)
    entries = {}
    for t in range(m):
        ty = inst.agents[t][0]
        if frozenset([t]) not in ty.family or abs(ty.p - (1 - delta)) > 1e-9:
            raise ValueError(f"agent {t + 1} is not deterministic on item {t + 1}")
        entries[(t, 0, frozenset([t]))] = 1.0 - delta
    for k, ty in enumerate(last):
        for S in ty.family:
            if S:
                entries[(m, k, S)] = delta / n_types
    return make_solution(inst, entries)


@dataclass(frozen=True)
class FeasibilityReport:
    item_mass: float
    type_mass: float
    online: float
    box: float
    tol: float = FEAS_TOL

    @property
    def passed(self) -> bool:
        return max(self.item_mass, self.type_mass, self.online, self.box) <= self.tol

    def to_dict(self) -> dict:
        return {"item_mass": self.item_mass, "type_mass": self.type_mass,
                "online": self.online, "box": self.box, "passed": self.passed}


def verify_feasibility(sol: LpSolution, inst: Instance, tol: float = FEAS_TOL) -> FeasibilityReport:
    """Largest violation of each constraint family (0 when satisfied)."""
    m = inst.m
    item = np.zeros(m)
    tmass = {}
    own = {}
    box = 0.0
    prior_by_agent = np.zeros((inst.T + 1, m))
    for (t, k, S), x in sol.entries.items():
        box = max(box, -x, x - 1.0)
        tmass[(t, k)] = tmass.get((t, k), 0.0) + x
        for i in S:
            item[i] += x
            prior_by_agent[t + 1, i] += x
            own[(t, k, i)] = own.get((t, k, i), 0.0) + x
    prior = np.cumsum(prior_by_agent, axis=0)
    item_v = float(max(0.0, (item - 1.0).max())) if m else 0.0
    type_v = 0.0
    for (t, k), s in tmass.items():
        type_v = max(type_v, s - inst.agents[t][k].p)
    online_v = 0.0
    for (t, k, i), s in own.items():
        p = inst.agents[t][k].p
        online_v = max(online_v, s - p * (1.0 - prior[t, i]))
    return FeasibilityReport(item_v, type_v, online_v, max(box, 0.0), tol)


def lp_item_value(sol: LpSolution, inst: Instance, i: int) -> float:
    """Item ``i``'s share ``Σ x · w_{t,k,S}(i)`` of the objective."""
    if not (0 <= i < inst.m):
        raise IndexError(f"item index {i} out of range for m={inst.m}")
    return sol.per_item[i]


# ---------------------------------------------------------------- file format

def solution_to_dict(sol: LpSolution) -> dict:
    entries = sorted(sol.entries.items(), key=lambda kv: (kv[0][0], kv[0][1], len(kv[0][2]), sorted(kv[0][2])))
    return {
        "objective": sol.objective,
        "entries": [{"t": t + 1, "k": k + 1, "S": sorted(i + 1 for i in S), "x": x}
                    for (t, k, S), x in entries],
        "per_item": list(sol.per_item),
        "tight": sol.tight,
        "appended_items": [i + 1 for i in sol.appended],
    }


def solution_from_dict(d: dict, inst: Instance):
    """Rebuild a solution for ``inst``; returns ``(sol, instance_it_refers_to)``.

    Objective and per-item values are recomputed from the entries. When the
    file records appended items the matching zero-value agents are added to
    ``inst`` first.
    """
    appended = tuple(int(i) - 1 for i in d.get("appended_items", []))
    if appended:
        zero = zero_valuation(inst.m)
        inst = inst.with_agents([(AgentType(1.0, zero, (EMPTY, frozenset([i]))),) for i in appended])
    entries = {}
    for e in d["entries"]:
        t, k = int(e["t"]) - 1, int(e["k"]) - 1
        S = frozenset(int(i) - 1 for i in e["S"])
        if not (0 <= t < inst.T and 0 <= k < len(inst.agents[t])):
            raise ValueError(f"solution entry refers to agent {t + 1} type {k + 1}, not in the instance")
        entries[(t, k, S)] = float(e["x"])
    sol = make_solution(inst, entries, tight=bool(d.get("tight", False)), appended=appended)
    return sol, inst


def save_solution(sol: LpSolution, path) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(sol), indent=1) + "\n")


def load_solution(path, inst: Instance):
    return solution_from_dict(json.loads(Path(path).read_text()), inst)
