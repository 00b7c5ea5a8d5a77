"""Split LP tuples into a high-value, low-mass free part and the rest.

A tuple is ``(t, k, S, i)`` with ``x[t,k,S] > 0`` and ``i ∈ S``. Free tuples
belong to items whose stopping problem is close to the half-benchmark bound
and carry a prefix marginal well above half of the item's LP share. Free
tuples are further split by how much of the item's mass precedes them.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .baseline import BaselineBundle, easy_check
from .config_lp import LpSolution, require_tight
from .instance import Instance

EPS_DEFAULT = 1e-16
EPS_E_DEFAULT = 0.033
EPS_GUARANTEE_MAX = 1e-4
STRICT_TOL = 1e-12


@dataclass(frozen=True)
class FreeDetDecomposition:
    """Free/deterministic tuple sets and the early free weight.

    Attributes
    ----------
    U : frozenset
        Items whose stopping optimum is at most ``(0.5 + eps**0.75 / 4)`` of
        their LP share.
    FR, DT : frozenset of (t, k, S, i)
    FR_E, FR_L : frozenset of (t, k, S, i)
        Free tuples whose prior mass of item ``i`` is at most ``1 - eps_E``,
        and the remaining free tuples.
    W_E : float
        ``Σ_i W_E_i``, the ``x · w`` weight of the early free tuples.
    """

    eps: float
    eps_E: float
    U: frozenset
    FR: frozenset
    DT: frozenset
    FR_E: frozenset
    FR_L: frozenset
    W_E: float
    W_E_i: tuple
    out_of_range: bool

    def summary(self) -> dict:
        return {
            "eps": self.eps,
            "eps_E": self.eps_E,
            "U": sorted(i + 1 for i in self.U),
            "n_FR": len(self.FR),
            "n_DT": len(self.DT),
            "n_FR_E": len(self.FR_E),
            "n_FR_L": len(self.FR_L),
            "W_E": self.W_E,
            "W_E_i": list(self.W_E_i),
            "eps_out_of_range": self.out_of_range,
        }


def tuple_weights(sol: LpSolution, bundle: BaselineBundle) -> dict:
    """``(t, k, S, i) -> (x, w)`` over every tuple with ``x > 0`` and ``i ∈ S``."""
    out = {}
    for (t, k, ci), ws in bundle.marginals.items():
        S = bundle.sampler.cols[(t, k)][ci]
        x = bundle.sampler.col_x[(t, k)][ci]
        for i, w in ws:
            out[(t, k, S, i)] = (x, w)
    return out


def prior_mass(inst: Instance, sol: LpSolution) -> np.ndarray:
    """``prior[t, i] = Σ_{s<t} Σ_{k, S∋i} x``, shape ``(T + 1, m)``."""
    per_agent = np.zeros((inst.T + 1, inst.m))
    for (t, _, S), x in sol.entries.items():
        for i in S:
            per_agent[t + 1, i] += x
    return np.cumsum(per_agent, axis=0)


def compute(inst: Instance, sol: LpSolution, bundle: BaselineBundle,
            eps: float = EPS_DEFAULT, eps_E: float = EPS_E_DEFAULT) -> FreeDetDecomposition:
    """Build the decomposition for a tight solution.

    The guarantees about it only hold for ``eps < 1e-4``; larger values are
    accepted for exploration and flagged with a ``RuntimeWarning`` and
    ``out_of_range=True``.
    """
    require_tight(sol)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not (0 < eps_E < 1):
        raise ValueError(f"eps_E must lie in (0, 1), got {eps_E}")
    out_of_range = eps >= EPS_GUARANTEE_MAX
    if out_of_range:
        warnings.warn(f"eps={eps} is outside (0, 1e-4); decomposition bounds are not guaranteed",
                      RuntimeWarning, stacklevel=2)
    lp_i = np.asarray(sol.per_item)
    opt_i = np.asarray(bundle.opt_values)
    U = frozenset(int(i) for i in np.flatnonzero(opt_i <= (0.5 + eps ** 0.75 / 4) * lp_i))
    high = 0.5 + 2 * eps ** 0.25
    prior = prior_mass(inst, sol)

    FR, DT, FR_E, FR_L = set(), set(), set(), set()
    W_E_i = np.zeros(inst.m)
    for key, (x, w) in tuple_weights(sol, bundle).items():
        t, _, _, i = key
        if i in U and w > high * lp_i[i] + STRICT_TOL:
            FR.add(key)
            if prior[t, i] <= 1 - eps_E + STRICT_TOL:
                FR_E.add(key)
                W_E_i[i] += x * w
            else:
                FR_L.add(key)
        else:
            DT.add(key)
    return FreeDetDecomposition(
        eps=eps, eps_E=eps_E, U=U,
        FR=frozenset(FR), DT=frozenset(DT), FR_E=frozenset(FR_E), FR_L=frozenset(FR_L),
        W_E=float(W_E_i.sum()), W_E_i=tuple(float(a) for a in W_E_i),
        out_of_range=out_of_range,
    )


@dataclass(frozen=True)
class DecompositionAudit:
    """Margins of the three decomposition bounds; a margin ``>= 0`` means the bound holds.

    ``vacuous`` is set when the easy check passes, in which case the bounds
    are not claimed and ``passed`` is true.
    """

    vacuous: bool
    outside_mass: float
    outside_bound: float
    fr_mass: tuple
    fr_mass_bound: float
    fr_weight: tuple
    fr_weight_range: tuple
    margins: dict
    passed: bool

    def to_dict(self) -> dict:
        return {
            "vacuous": self.vacuous,
            "outside_U_lp": self.outside_mass,
            "outside_U_bound": self.outside_bound,
            "max_fr_mass": max(self.fr_mass, default=0.0),
            "fr_mass_bound": self.fr_mass_bound,
            "margins": self.margins,
            "pass": self.passed,
        }


def verify_decomposition_bounds(dec: FreeDetDecomposition, sol: LpSolution, bundle: BaselineBundle) -> DecompositionAudit:
    """Audit the decomposition bounds.

    (a) LP share of items outside ``U`` is at most ``4 eps**0.25 · LP``;
    (b) per item, free tuples carry mass at most ``eps**0.25``;
    (c) per item in ``U``, the free ``x · w`` weight lies within
    ``(0.5 ± 2 eps**0.25) · LP_i``.
    """
    q = dec.eps ** 0.25
    lp = sol.objective
    lp_i = np.asarray(sol.per_item)
    m = len(lp_i)
    tw = tuple_weights(sol, bundle)
    fr_mass = np.zeros(m)
    fr_weight = np.zeros(m)
    for key in dec.FR:
        x, w = tw[key]
        fr_mass[key[3]] += x
        fr_weight[key[3]] += x * w
    outside = float(sum(lp_i[i] for i in range(m) if i not in dec.U))
    margin_a = 4 * q * lp - outside
    margin_b = float(q - fr_mass.max()) if m else q
    in_u = sorted(dec.U)
    lo = (0.5 - 2 * q) * lp_i
    hi = (0.5 + 2 * q) * lp_i
    margin_c = float(min(min(fr_weight[i] - lo[i], hi[i] - fr_weight[i]) for i in in_u)) if in_u else 0.0
    tol = 1e-9 * max(1.0, lp)
    margins = {"a": margin_a, "b": margin_b, "c": margin_c}
    vacuous = easy_check(bundle, sol, dec.eps)
    passed = vacuous or all(v >= -tol for v in margins.values())
    return DecompositionAudit(
        vacuous=vacuous,
        outside_mass=outside, outside_bound=4 * q * lp,
        fr_mass=tuple(float(a) for a in fr_mass), fr_mass_bound=q,
        fr_weight=tuple(float(a) for a in fr_weight),
        fr_weight_range=(tuple(float(a) for a in lo), tuple(float(a) for a in hi)),
        margins=margins, passed=passed,
    )
