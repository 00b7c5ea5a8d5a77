"""Single-item prophet inequality: benchmark, optimal thresholds and policies.

A :class:`PiInstance` is a sequence of finite value distributions. Each
support point is an :class:`Atom` carrying a ``tag`` that identifies where it
came from, so two atoms with equal value stay distinguishable. Probability not
covered by a step's atoms is value 0.

Policies only ever accept strictly positive values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

import numpy as np

PROB_TOL = 1e-9
TIE_TOL = 1e-12


@dataclass(frozen=True)
class Atom:
    value: float
    prob: float
    tag: Hashable = None


def _as_atom(a, j) -> Atom:
    if isinstance(a, Atom):
        return a
    value, prob = a[0], a[1]
    tag = a[2] if len(a) > 2 else j
    return Atom(float(value), float(prob), tag)


@dataclass(frozen=True)
class PiInstance:
    """Stopping problem over ``T`` steps.

    Parameters
    ----------
    steps : sequence of sequences
        Step ``t`` lists its atoms, either :class:`Atom` objects or
        ``(value, prob[, tag])`` tuples. Untagged atoms get their position as
        tag.
    """

    steps: tuple

    def __init__(self, steps: Sequence[Sequence] = (), validate: bool = True):
        atoms = tuple(tuple(_as_atom(a, j) for j, a in enumerate(step)) for step in steps)
        object.__setattr__(self, "steps", atoms)
        if validate:
            self.check()

    @property
    def T(self) -> int:
        return len(self.steps)

    @property
    def exante_mass(self) -> float:
        return float(sum(a.prob for step in self.steps for a in step if a.value > 0))

    def check(self) -> None:
        for t, step in enumerate(self.steps):
            for a in step:
                if a.value < 0 or not math.isfinite(a.value):
                    raise ValueError(f"step {t}: value {a.value} must be finite and >= 0")
                if a.prob < 0:
                    raise ValueError(f"step {t}: negative probability {a.prob}")
            if sum(a.prob for a in step) > 1 + PROB_TOL:
                raise ValueError(f"step {t}: probabilities sum above 1")
        if self.exante_mass > 1 + PROB_TOL:
            raise ValueError(f"ex-ante mass {self.exante_mass} exceeds 1")


def benchmark(pi: PiInstance) -> float:
    """Sum over steps of the expected value."""
    return float(sum(a.value * a.prob for step in pi.steps for a in step))


# ------------------------------------------------------------------- policies

class PiPolicy:
    """Decides, per step and atom, whether to stop and take the value."""

    def accepts(self, t: int, atom: Atom) -> bool:
        raise NotImplementedError


@dataclass(frozen=True)
class OptimalThresholds(PiPolicy):
    tau: tuple

    def accepts(self, t, atom):
        return atom.value > 0 and atom.value >= self.tau[t] - TIE_TOL * max(1.0, self.tau[t])


@dataclass(frozen=True)
class FixedThreshold(PiPolicy):
    tau: float

    def accepts(self, t, atom):
        return atom.value > 0 and atom.value >= self.tau


@dataclass(frozen=True)
class FixedSubset(PiPolicy):
    """Accept exactly the listed ``(step, tag)`` pairs."""

    accept: frozenset

    def accepts(self, t, atom):
        return atom.value > 0 and (t, atom.tag) in self.accept


@dataclass(frozen=True)
class TiPolicy(PiPolicy):
    """Before step ``t_i`` accept only the ``free`` pairs; from ``t_i`` on accept anything positive."""

    t_i: int
    free: frozenset

    def accepts(self, t, atom):
        if atom.value <= 0:
            return False
        return t >= self.t_i or (t, atom.tag) in self.free


def optimal_thresholds(pi: PiInstance):
    """Backward-induction thresholds and the optimal expected value.

    Returns
    -------
    policy : OptimalThresholds
        ``tau[T-1] = 0`` and ``tau[t] = E[max(w_{t+1}, tau[t+1])]``.
    opt_value : float
        ``E[max(w_0, tau[0])]``, the value of stopping at the first positive
        ``w_t >= tau[t]``.
    """
    T = pi.T
    tau = [0.0] * T
    cont = 0.0
    for t in range(T - 1, -1, -1):
        tau[t] = cont
        step = pi.steps[t]
        mass = sum(a.prob for a in step)
        cont = sum(a.prob * max(a.value, cont) for a in step) + max(0.0, 1.0 - mass) * cont
    return OptimalThresholds(tuple(tau)), float(cont)


def accept_masks(pi: PiInstance, policy: PiPolicy) -> list:
    return [np.array([policy.accepts(t, a) for a in step], dtype=bool) for t, step in enumerate(pi.steps)]


def policy_value(pi: PiInstance, policy: PiPolicy) -> float:
    """Exact expected reward: ``Σ_t Π_{s<t} (1 - Pr[stop at s]) · E[w_t 1[stop at t]]``."""
    alive = 1.0
    total = 0.0
    for t, step in enumerate(pi.steps):
        stop_p = 0.0
        gain = 0.0
        for a in step:
            if policy.accepts(t, a):
                stop_p += a.prob
                gain += a.prob * a.value
        total += alive * gain
        alive *= max(0.0, 1.0 - stop_p)
    return float(total)


# ------------------------------------------------------------------ streaming

def sample_stream(pi: PiInstance, rng: np.random.Generator) -> list:
    """One realisation: per step the drawn :class:`Atom`, or ``None`` for value 0."""
    out = []
    for step in pi.steps:
        u = rng.random()
        acc = 0.0
        hit = None
        for a in step:
            acc += a.prob
            if u < acc:
                hit = a
                break
        out.append(hit)
    return out


def run_stream(policy: PiPolicy, stream: Sequence[Optional[Atom]], T: Optional[int] = None) -> float:
    """Single pass over a realised stream; returns the accepted value or 0."""
    if T is not None and len(stream) != T:
        raise ValueError(f"stream has {len(stream)} steps, instance has {T}")
    for t, a in enumerate(stream):
        if a is not None and policy.accepts(t, a):
            return a.value
    return 0.0


def simulate(pi: PiInstance, policy: PiPolicy, trials: int, seed) -> np.ndarray:
    """Vectorised Monte Carlo of ``policy`` over ``trials`` independent streams."""
    rng = np.random.default_rng(seed)
    reward = np.zeros(trials)
    alive = np.ones(trials, dtype=bool)
    for t, step in enumerate(pi.steps):
        if not step:
            continue
        u = rng.random(trials)
        cum = np.cumsum([a.prob for a in step])
        idx = np.searchsorted(cum, u, side="right")
        acc = np.array([policy.accepts(t, a) for a in step] + [False])
        val = np.array([a.value for a in step] + [0.0])
        take = alive & acc[idx]
        reward[take] = val[idx[take]]
        alive &= ~take
    return reward


# ------------------------------------------------------------ tail-mass check

@dataclass(frozen=True)
class FreeDetReport:
    holds_premise: bool
    tail_prob: float
    tail_mass: float
    delta: float
    mass_bound: float
    passed: bool

    def to_dict(self) -> dict:
        return {"holds_premise": self.holds_premise, "tail_prob": self.tail_prob,
                "tail_mass": self.tail_mass, "delta": self.delta,
                "mass_bound": self.mass_bound, "pass": self.passed}


def free_det_check(pi: PiInstance, mu: float, beta: float) -> FreeDetReport:
    """Check the tail bounds that near-tight instances must satisfy.

    When the optimum is at most ``(0.5 + mu)`` times the benchmark, values
    above ``beta · benchmark`` must carry total probability at most
    ``delta = sqrt(4 mu / (beta - 0.5 - mu))`` and expected mass at most
    ``(0.5 + mu) / (1 - delta) · benchmark``. For ``delta >= 1`` the mass bound
    is infinite.
    """
    if not (0 <= mu < 0.5):
        raise ValueError(f"mu must lie in [0, 0.5), got {mu}")
    if not beta > 0.5 + mu:
        raise ValueError(f"beta must exceed 0.5 + mu = {0.5 + mu}, got {beta}")
    bench = benchmark(pi)
    _, opt = optimal_thresholds(pi)
    delta = math.sqrt(4 * mu / (beta - 0.5 - mu))
    cut = beta * bench
    tail_prob = float(sum(a.prob for step in pi.steps for a in step if a.value > cut))
    tail_mass = float(sum(a.prob * a.value for step in pi.steps for a in step if a.value > cut))
    holds = opt <= (0.5 + mu) * bench + TIE_TOL
    bound = (0.5 + mu) / (1 - delta) * bench if delta < 1 else math.inf
    ok = (not holds) or (tail_prob <= delta + PROB_TOL and tail_mass <= bound * (1 + PROB_TOL) + PROB_TOL)
    return FreeDetReport(holds, tail_prob, tail_mass, delta, bound, ok)


def random_pi_instance(rng: np.random.Generator, max_T: int = 8, max_support: int = 4,
                       total_mass: Optional[float] = None) -> PiInstance:
    """Random ex-ante-feasible instance with up to ``max_T`` steps of ``max_support`` atoms."""
    T = int(rng.integers(1, max_T + 1))
    sizes = rng.integers(1, max_support + 1, size=T)
    raw = [rng.random(s) for s in sizes]
    total = sum(r.sum() for r in raw)
    target = rng.uniform(0.05, 1.0) if total_mass is None else total_mass
    steps = []
    for r in raw:
        probs = r / total * target
        values = rng.exponential(1.0, size=len(r)) * rng.choice([1.0, 10.0, 100.0])
        steps.append([(float(v), float(p)) for v, p in zip(values, probs)])
    return PiInstance(steps)
