"""Monotone set-function valuations over items ``0..m-1``.

Items are 0-based in memory; files use 1-based indices (see ``philo.instance``).
The canonical item order is the integer order, and every prefix marginal in the
package is taken with respect to it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Optional

import numpy as np

from .exceptions import TooLarge

TOL = 1e-9

DEMAND_EXHAUSTIVE_MAX_M = 20
CHECK_EXHAUSTIVE_MAX_M = 16


def to_mask(items: Iterable[int]) -> int:
    mask = 0
    for i in items:
        mask |= 1 << i
    return mask


def from_mask(mask: int) -> frozenset:
    items = []
    i = 0
    while mask:
        if mask & 1:
            items.append(i)
        mask >>= 1
        i += 1
    return frozenset(items)


class Valuation:
    """Base class for set-function oracles.

    Subclasses implement ``_value`` on a frozenset of valid item indices;
    the public ``value`` validates its argument first.
    """

    kind = "abstract"
    m: int

    def _value(self, items: frozenset) -> float:
        raise NotImplementedError

    def _check(self, items) -> frozenset:
        s = frozenset(items)
        for i in s:
            if not (0 <= i < self.m):
                raise IndexError(f"item index {i} out of range for m={self.m}")
        return s

    def value(self, items: Iterable[int]) -> float:
        return self._value(self._check(items))

    __call__ = value

    def marginal_w(self, items: Iterable[int], i: int) -> float:
        """Prefix marginal ``v(S ∩ [0..i]) - v(S ∩ [0..i-1])``; zero when ``i ∉ S``."""
        s = self._check(items)
        if not (0 <= i < self.m):
            raise IndexError(f"item index {i} out of range for m={self.m}")
        if i not in s:
            return 0.0
        before = frozenset(j for j in s if j < i)
        return self._value(before | {i}) - self._value(before)

    def marginals(self, items: Iterable[int], given: frozenset = frozenset()) -> dict:
        """All prefix marginals of ``S`` in one pass, keyed by item.

        With ``given`` non-empty the marginals are those of ``v(· | given)``.
        """
        s = sorted(self._check(items))
        out = {}
        prefix = set(given)
        prev = self._value(frozenset(prefix))
        for i in s:
            prefix.add(i)
            cur = self._value(frozenset(prefix))
            out[i] = cur - prev
            prev = cur
        return out

    def restricted(self, given: Iterable[int]) -> "Restricted":
        return Restricted(self, self._check(given))

    def demand(self, prices) -> frozenset:
        return _demand_exhaustive(self, _check_prices(self, prices))

    @cached_property
    def table(self) -> np.ndarray:
        """Values on every subset, indexed by bitmask."""
        if self.m > 24:
            raise TooLarge(f"value table needs m <= 24, got m={self.m}")
        return np.array([self._value(from_mask(mask)) for mask in range(1 << self.m)])

    def to_dict(self) -> dict:
        raise TypeError(f"{type(self).__name__} has no file encoding")


def _nonneg_tuple(values, name) -> tuple:
    out = tuple(float(x) for x in values)
    if any(not np.isfinite(x) or x < 0 for x in out):
        raise ValueError(f"{name} must be finite and nonnegative")
    return out


@dataclass(frozen=True, eq=True)
class Additive(Valuation):
    weights: tuple
    kind = "additive"

    def __post_init__(self):
        object.__setattr__(self, "weights", _nonneg_tuple(self.weights, "weights"))

    @property
    def m(self) -> int:
        return len(self.weights)

    def _value(self, items):
        w = self.weights
        return float(sum(w[i] for i in items))

    def demand(self, prices):
        a = _check_prices(self, prices)
        return frozenset(i for i, w in enumerate(self.weights) if w - a[i] > TOL)

    def to_dict(self):
        return {"kind": self.kind, "m": self.m, "weights": list(self.weights)}


@dataclass(frozen=True, eq=True)
class UnitDemand(Valuation):
    weights: tuple
    kind = "unit_demand"

    def __post_init__(self):
        object.__setattr__(self, "weights", _nonneg_tuple(self.weights, "weights"))

    @property
    def m(self) -> int:
        return len(self.weights)

    def _value(self, items):
        w = self.weights
        return max((w[i] for i in items), default=0.0)

    def demand(self, prices):
        a = _check_prices(self, prices)
        best, best_u = None, 0.0
        for i, w in enumerate(self.weights):
            u = w - a[i]
            if u > best_u + TOL:
                best, best_u = i, u
        return frozenset() if best is None else frozenset([best])

    def to_dict(self):
        return {"kind": self.kind, "m": self.m, "weights": list(self.weights)}


@dataclass(frozen=True, eq=True)
class BudgetAdditive(Valuation):
    weights: tuple
    cap: float
    kind = "budget_additive"

    def __post_init__(self):
        object.__setattr__(self, "weights", _nonneg_tuple(self.weights, "weights"))
        cap = float(self.cap)
        if not np.isfinite(cap) or cap < 0:
            raise ValueError("cap must be finite and nonnegative")
        object.__setattr__(self, "cap", cap)

    @property
    def m(self) -> int:
        return len(self.weights)

    def _value(self, items):
        w = self.weights
        return min(self.cap, float(sum(w[i] for i in items)))

    def to_dict(self):
        return {"kind": self.kind, "m": self.m, "weights": list(self.weights), "cap": self.cap}


@dataclass(frozen=True, eq=True)
class XosExplicit(Valuation):
    clauses: tuple
    kind = "xos"

    def __post_init__(self):
        clauses = tuple(_nonneg_tuple(c, "clause entries") for c in self.clauses)
        if not clauses:
            raise ValueError("XOS valuation needs at least one clause")
        if len({len(c) for c in clauses}) != 1:
            raise ValueError("all XOS clauses must have length m")
        object.__setattr__(self, "clauses", clauses)

    @property
    def m(self) -> int:
        return len(self.clauses[0])

    def _value(self, items):
        return max(float(sum(c[i] for i in items)) for c in self.clauses)

    def to_dict(self):
        return {"kind": self.kind, "m": self.m, "clauses": [list(c) for c in self.clauses]}


@dataclass(frozen=True, eq=True)
class PartitionMax(Valuation):
    """``scale * max_j |U_j ∩ S|`` for a partition ``U_1..U_b`` of the items."""

    partition: tuple
    scale: float = 1.0
    kind = "partition_max"
    _block: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        blocks = tuple(frozenset(int(i) for i in b) for b in self.partition)
        if not blocks:
            raise ValueError("partition must have at least one block")
        items = [i for b in blocks for i in b]
        m = len(items)
        if len(set(items)) != m:
            raise ValueError("partition blocks must be pairwise disjoint")
        if set(items) != set(range(m)):
            raise ValueError("partition blocks must cover items 0..m-1")
        scale = float(self.scale)
        if not np.isfinite(scale) or scale <= 0:
            raise ValueError("scale must be positive")
        block = [0] * m
        for j, b in enumerate(blocks):
            for i in b:
                block[i] = j
        object.__setattr__(self, "partition", blocks)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "_block", tuple(block))

    @property
    def m(self) -> int:
        return len(self._block)

    def _value(self, items):
        if not items:
            return 0.0
        counts = [0] * len(self.partition)
        block = self._block
        for i in items:
            counts[block[i]] += 1
        return self.scale * max(counts)

    def to_dict(self):
        return {
            "kind": self.kind,
            "m": self.m,
            "partition": [sorted(b) for b in self.partition],
            "scale": self.scale,
        }


@dataclass(frozen=True, eq=True)
class Restricted(Valuation):
    """``v(B | A) = v(B ∪ A) - v(A)`` for a fixed base set ``A``."""

    base: Valuation
    given: frozenset
    kind = "restricted"
    _offset: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "given", frozenset(self.given))
        object.__setattr__(self, "_offset", self.base._value(self.given))

    @property
    def m(self) -> int:
        return self.base.m

    def _value(self, items):
        return self.base._value(items | self.given) - self._offset


def zero_valuation(m: int) -> Additive:
    return Additive((0.0,) * m)


def _check_prices(v: Valuation, prices) -> tuple:
    a = tuple(float(x) for x in prices)
    if len(a) != v.m:
        raise ValueError(f"expected {v.m} prices, got {len(a)}")
    if any(not np.isfinite(x) or x < 0 for x in a):
        raise ValueError("prices must be finite and nonnegative")
    return a


def _demand_exhaustive(v: Valuation, prices: tuple) -> frozenset:
    if v.m > DEMAND_EXHAUSTIVE_MAX_M:
        raise TooLarge(f"exhaustive demand query needs m <= {DEMAND_EXHAUSTIVE_MAX_M}")
    best_key, best_set = None, frozenset()
    best_u = -np.inf
    # enumerate by size so the first set reaching the best utility is the smallest
    candidates = []
    for size in range(v.m + 1):
        for combo in combinations(range(v.m), size):
            s = frozenset(combo)
            u = v._value(s) - sum(prices[i] for i in combo)
            candidates.append((u, size, combo))
            if u > best_u:
                best_u = u
    for u, size, combo in candidates:
        if u >= best_u - TOL:
            key = (size, combo)
            if best_key is None or key < best_key:
                best_key, best_set = key, frozenset(combo)
    return best_set


# Functional forms mirroring the operation names used throughout the package.

def value(v: Valuation, items: Iterable[int]) -> float:
    return v.value(items)


def marginal_w(v: Valuation, items: Iterable[int], i: int) -> float:
    return v.marginal_w(items, i)


def restricted(v: Valuation, given: Iterable[int]) -> Restricted:
    return v.restricted(given)


def demand_oracle(v: Valuation, prices) -> frozenset:
    """Utility-maximizing bundle; ties go to the smallest, then lexicographically first set."""
    return v.demand(prices)


def demand_exhaustive(v: Valuation, prices) -> frozenset:
    return _demand_exhaustive(v, _check_prices(v, prices))


@dataclass(frozen=True)
class PropertyReport:
    monotone: bool
    submodular: bool
    witness: Optional[dict] = None


def check_monotone_submodular(v: Valuation) -> PropertyReport:
    """Exhaustively test monotonicity and submodularity.

    Submodularity is checked through the equivalent local condition
    ``v(A+i) - v(A) >= v(A+j+i) - v(A+j)`` over all ``A`` and ``i != j`` outside ``A``.
    The witness for a failure is ``{"property", "A", "B", "i"}`` with ``A ⊆ B``.
    """
    m = v.m
    if m > CHECK_EXHAUSTIVE_MAX_M:
        raise TooLarge(f"exhaustive property check needs m <= {CHECK_EXHAUSTIVE_MAX_M}")
    table = v.table
    masks = np.arange(1 << m)
    witness = None
    monotone = True
    for i in range(m):
        bit = 1 << i
        base = masks[(masks & bit) == 0]
        bad = np.nonzero(table[base | bit] < table[base] - TOL)[0]
        if bad.size:
            a = int(base[bad[0]])
            monotone = False
            witness = {"property": "monotone", "A": from_mask(a), "B": from_mask(a | bit), "i": i}
            break
    submodular = True
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            bi, bj = 1 << i, 1 << j
            base = masks[(masks & (bi | bj)) == 0]
            lhs = table[base | bi] - table[base]
            rhs = table[base | bi | bj] - table[base | bj]
            bad = np.nonzero(lhs < rhs - TOL)[0]
            if bad.size:
                a = int(base[bad[0]])
                submodular = False
                if witness is None:
                    witness = {
                        "property": "submodular",
                        "A": from_mask(a),
                        "B": from_mask(a | bj),
                        "i": i,
                    }
                break
        if not submodular:
            break
    return PropertyReport(monotone, submodular, witness)


def from_dict(d: dict) -> Valuation:
    """Decode the file encoding of a valuation (items 1-based on disk)."""
    kind = d["kind"]
    m = int(d["m"])
    if kind == "additive":
        v = Additive(d["weights"])
    elif kind == "unit_demand":
        v = UnitDemand(d["weights"])
    elif kind == "budget_additive":
        v = BudgetAdditive(d["weights"], d["cap"])
    elif kind == "xos":
        v = XosExplicit(d["clauses"])
    elif kind == "partition_max":
        v = PartitionMax([[i - 1 for i in b] for b in d["partition"]], d.get("scale", 1.0))
    else:
        raise ValueError(f"unknown valuation kind {kind!r}")
    if v.m != m:
        raise ValueError(f"valuation declares m={m} but encodes {v.m} items")
    return v


def to_dict(v: Valuation) -> dict:
    d = v.to_dict()
    if d["kind"] == "partition_max":
        d["partition"] = [[i + 1 for i in b] for b in d["partition"]]
    return d
