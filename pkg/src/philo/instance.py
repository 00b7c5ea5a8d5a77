"""Instances of online combinatorial allocation, their file format and generators.

An instance has ``m`` items and ``T`` agents arriving in order. Agent ``t``
draws one of its types ``k`` with probability ``p``; each type carries a
valuation and a *family*, the candidate bundles that become LP columns.
An agent that "arrives with probability p" is encoded as an extra zero-value
type of probability ``1 - p`` whose family is ``{∅}``.

On disk every index (items, agents, types) is 1-based.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from itertools import combinations
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import valuations as val
from .exceptions import InstanceError, TooLarge
from .valuations import Additive, BudgetAdditive, PartitionMax, UnitDemand, Valuation

PROB_TOL = 1e-9
ENUMERATE_MAX_M = 30
ENUMERATE_MAX_TYPES = 100_000

EMPTY = frozenset()


@dataclass(frozen=True)
class AgentType:
    p: float
    valuation: Valuation
    family: tuple

    def __post_init__(self):
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "family", tuple(frozenset(s) for s in self.family))


@dataclass(frozen=True)
class Instance:
    m: int
    agents: tuple
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(tuple(a) for a in self.agents))

    @property
    def T(self) -> int:
        return len(self.agents)

    def types(self):
        """Yield ``(t, k, AgentType)`` for every type, 0-based."""
        for t, agent in enumerate(self.agents):
            for k, ty in enumerate(agent):
                yield t, k, ty

    def with_agents(self, extra: Sequence[Sequence[AgentType]]) -> "Instance":
        return replace(self, agents=self.agents + tuple(tuple(a) for a in extra))

    def n_columns(self) -> int:
        return sum(len(ty.family) for _, _, ty in self.types())


def validate(inst: Instance) -> list:
    """Return every invariant violation of ``inst``; an empty list means valid."""
    errors = []
    if not isinstance(inst.m, int) or inst.m < 1:
        errors.append(f"item count must be a positive integer (got {inst.m!r})")
        return errors
    if inst.T == 0:
        errors.append("instance has no agents")
    for t, agent in enumerate(inst.agents, start=1):
        if not agent:
            errors.append(f"agent {t}: has no types")
            continue
        total = 0.0
        for k, ty in enumerate(agent, start=1):
            where = f"agent {t} type {k}"
            if not (0.0 <= ty.p <= 1.0):
                errors.append(f"{where}: probability {ty.p} outside [0, 1]")
            total += ty.p
            if ty.valuation.m != inst.m:
                errors.append(f"{where}: valuation has m={ty.valuation.m}, instance has m={inst.m}")
            if EMPTY not in ty.family:
                errors.append(f"{where}: family must contain the empty set")
            for s in ty.family:
                bad = [i for i in s if not (0 <= i < inst.m)]
                if bad:
                    errors.append(f"{where}: family member has item out of range ({bad[0] + 1})")
        if abs(total - 1.0) > PROB_TOL:
            errors.append(f"agent {t}: probabilities must sum to 1 (got {total!r})")
    return errors


def check_instance(inst: Instance) -> Instance:
    """Raise :class:`InstanceError` listing all violations, else return ``inst``."""
    if not isinstance(inst, Instance):
        raise TypeError(f"expected an Instance, got {type(inst).__name__}")
    errors = validate(inst)
    if errors:
        raise InstanceError(errors)
    return inst


# ---------------------------------------------------------------- file format

def to_dict(inst: Instance) -> dict:
    d = {
        "m": inst.m,
        "agents": [
            [
                {
                    "p": ty.p,
                    "valuation": val.to_dict(ty.valuation),
                    "family": [sorted(i + 1 for i in s) for s in ty.family],
                }
                for ty in agent
            ]
            for agent in inst.agents
        ],
    }
    if inst.name:
        d["name"] = inst.name
    return d


def from_dict(d: dict) -> Instance:
    m = int(d["m"])
    agents = []
    for agent in d["agents"]:
        types = []
        for ty in agent:
            family = tuple(frozenset(i - 1 for i in s) for s in ty["family"])
            types.append(AgentType(float(ty["p"]), val.from_dict(ty["valuation"]), family))
        agents.append(tuple(types))
    return Instance(m, tuple(agents), name=d.get("name", ""))


def dumps(inst: Instance) -> str:
    return json.dumps(to_dict(inst), indent=1) + "\n"


def loads(text: str) -> Instance:
    return from_dict(json.loads(text))


def save(inst: Instance, path) -> None:
    Path(path).write_text(dumps(inst))


def load(path) -> Instance:
    return loads(Path(path).read_text())


# ----------------------------------------------------------------- generators

def _inverse_integer(delta: float) -> int:
    if not (0 < delta < 1):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    n = round(1 / delta)
    if n < 2 or abs(n * delta - 1) > 1e-9:
        raise ValueError(f"1/delta must be an integer, got delta={delta}")
    return n


def _deterministic_agents(m: int, delta: float) -> list:
    agents = []
    for t in range(m):
        e_t = [0.0] * m
        e_t[t] = 1.0
        agents.append((
            AgentType(1.0 - delta, UnitDemand(e_t), (EMPTY, frozenset([t]))),
            AgentType(delta, val.zero_valuation(m), (EMPTY,)),
        ))
    return agents


def gen_unit_demand_hard(delta: float) -> Instance:
    """Unit-demand hard instance: ``m = 1/delta`` local agents, then one big agent.

    Agent ``t <= m`` arrives with probability ``1 - delta`` and values only item
    ``t`` at 1; the last agent always arrives and values any nonempty bundle at
    ``1/delta``.
    """
    n = _inverse_integer(delta)
    delta = 1.0 / n
    m = n
    agents = _deterministic_agents(m, delta)
    last = UnitDemand([float(n)] * m)
    family = (EMPTY,) + tuple(frozenset([i]) for i in range(m))
    agents.append((AgentType(1.0, last, family),))
    return Instance(m, tuple(agents), name=f"ud-hard(delta=1/{n})")


def count_equipartitions(m: int, blocks: int) -> int:
    size = m // blocks
    return math.factorial(m) // (math.factorial(size) ** blocks * math.factorial(blocks))


def equipartitions(m: int, blocks: int):
    """Yield every unordered partition of ``0..m-1`` into equal blocks.

    Each block is listed with its smallest item first, blocks in order of that item.
    """
    size = m // blocks

    def rec(remaining, acc):
        if not remaining:
            yield tuple(acc)
            return
        first, rest = remaining[0], remaining[1:]
        for others in combinations(rest, size - 1):
            block = (first,) + others
            left = tuple(i for i in rest if i not in others)
            yield from rec(left, acc + [frozenset(block)])

    yield from rec(tuple(range(m)), [])


def gen_xos_hard(delta: float, mode: str = "enumerate", n_types: Optional[int] = None,
                 seed: Optional[int] = None) -> Instance:
    """XOS hard instance with ``m = delta**-3`` items.

    The last agent's type is a uniformly random partition of the items into
    ``1/delta`` blocks of ``delta**-2`` items, valued ``(1/delta) * max_j |U_j ∩ S|``.
    ``mode="enumerate"`` lists all partitions as equiprobable types;
    ``mode="sample"`` draws ``n_types`` of them, which only approximates that
    distribution.
    """
    n = _inverse_integer(delta)
    delta = 1.0 / n
    m = n ** 3
    if mode == "enumerate":
        if m > ENUMERATE_MAX_M:
            raise TooLarge(f"enumerate mode needs m <= {ENUMERATE_MAX_M}, got m={m}")
        total = count_equipartitions(m, n)
        if total > ENUMERATE_MAX_TYPES:
            raise TooLarge(f"enumerate mode needs at most {ENUMERATE_MAX_TYPES} types, got {total}")
        partitions = list(equipartitions(m, n))
    elif mode == "sample":
        if not n_types or n_types < 1:
            raise ValueError("sample mode needs n_types >= 1")
        rng = np.random.default_rng(seed)
        partitions = []
        for _ in range(n_types):
            perm = rng.permutation(m)
            blocks = [frozenset(int(i) for i in perm[j * n * n:(j + 1) * n * n]) for j in range(n)]
            partitions.append(tuple(sorted(blocks, key=min)))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    p = 1.0 / len(partitions)
    last = tuple(
        AgentType(p, PartitionMax(part, scale=float(n)), (EMPTY,) + tuple(part))
        for part in partitions
    )
    agents = _deterministic_agents(m, delta)
    agents.append(last)
    return Instance(m, tuple(agents), name=f"xos-hard(delta=1/{n},{mode})")


def gen_random_submodular(m: int, T: int, K: int, seed: int,
                          kinds: Iterable[str] = ("additive", "unit_demand", "budget_additive"),
                          extra_sets: int = 3, all_subsets: bool = False) -> Instance:
    """Seeded random instance with submodular valuations for property tests.

    Families hold ``∅``, every singleton and ``extra_sets`` random bundles, or
    every subset when ``all_subsets`` is set.
    """
    if m > 12:
        raise TooLarge("random instances are capped at m <= 12")
    rng = np.random.default_rng(seed)
    kinds = tuple(kinds)
    agents = []
    for _ in range(T):
        probs = rng.random(K) + 0.05
        probs = probs / probs.sum()
        types = []
        for k in range(K):
            kind = kinds[int(rng.integers(len(kinds)))]
            w = np.round(rng.uniform(0.0, 1.0, size=m), 6).tolist()
            if kind == "additive":
                v = Additive(w)
            elif kind == "unit_demand":
                v = UnitDemand(w)
            elif kind == "budget_additive":
                cap = round(float(rng.uniform(0.3, 1.0) * sum(w)), 6)
                v = BudgetAdditive(w, cap)
            else:
                raise ValueError(f"unsupported kind {kind!r}")
            if all_subsets:
                family = tuple(val.from_mask(mask) for mask in range(1 << m))
            else:
                family = [EMPTY] + [frozenset([i]) for i in range(m)]
                for _ in range(extra_sets):
                    size = int(rng.integers(2, m + 1)) if m >= 2 else 1
                    s = frozenset(int(i) for i in rng.choice(m, size=size, replace=False))
                    if s not in family:
                        family.append(s)
                family = tuple(family)
            types.append(AgentType(float(probs[k]), v, family))
        agents.append(tuple(types))
    return Instance(m, tuple(agents), name=f"random(m={m},T={T},K={K},seed={seed})")
