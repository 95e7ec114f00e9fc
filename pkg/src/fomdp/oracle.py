"""Brute-force ground MDP used to check the abstract solvers.

Nothing here reuses the lifted matching code: substitutions are enumerated
over the object universe, and states are plain sorted tuples of fluents until
they are handed back to callers.
"""
from __future__ import annotations

import itertools
import logging
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .terms import CNState, Fluent, GroundState, Substitution, is_var

log = logging.getLogger(__name__)

MAX_GROUND_STATES = 200_000


@dataclass
class GroundOption:
    action: str
    theta: Substitution
    cost: float
    outcomes: list  # [(choice name, prob, successor index)]


@dataclass
class GroundMDP:
    gamma: float
    universe: tuple
    states: list
    rewards: list
    absorbing: list
    options: list  # per state: [GroundOption]
    initial: list
    index: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)

    def state_index(self, d) -> int:
        return self.index[_key(d)]


@dataclass
class OracleSolution:
    V: np.ndarray
    policy: list  # option index per state, or None
    iterations: int
    residual: float
    converged: bool


@dataclass
class CrossValidationReport:
    checked: int
    max_deviation: float
    min_signed: float
    offenders: list  # [(GroundState, abstract value, ground value)]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    def __str__(self) -> str:
        head = (f"checked={self.checked} max_deviation={self.max_deviation:.6g} "
                f"min_signed={self.min_signed:.6g} offenders={len(self.offenders)}")
        lines = [head] + [f"  {d}\tabstract={a!r}\tground={g!r}" for d, a, g in self.offenders[:20]]
        return "\n".join(lines)


def _key(d) -> tuple:
    return tuple(sorted((f.symbol, tuple(f.args)) for f in d))


# --- brute-force matching -------------------------------------------------------

def _subst(f, theta: dict) -> tuple:
    return (f.symbol, tuple(theta.get(a, a) for a in f.args))


def _vars(fluents) -> list[str]:
    out = []
    for f in fluents:
        for a in f.args:
            if is_var(a) and a not in out:
                out.append(a)
    return out


def _contained(fluents, theta: dict, have: Counter) -> bool:
    need = Counter(_subst(f, theta) for f in fluents)
    return all(have[k] >= n for k, n in need.items())


def _assignments(names: list[str], universe: tuple, base: dict):
    for vals in itertools.product(universe, repeat=len(names)):
        out = dict(base)
        out.update(zip(names, vals))
        yield out


def _has_instance(member, theta: dict, have: Counter, universe: tuple) -> bool:
    free = [v for v in _vars(member) if v not in theta]
    return any(_contained(member, s, have) for s in _assignments(free, universe, theta))


def brute_force_member(d, z: CNState, universe: tuple) -> bool:
    """``d ∈ Z^I`` by enumerating every substitution over ``universe``."""
    have = Counter(_key(d))
    for theta in _assignments(_vars(z.P), universe, {}):
        if not _contained(z.P, theta, have):
            continue
        if not any(_has_instance(n, theta, have, universe) for n in z.N):
            return True
    return False


def _ground_actions(action, have: Counter, universe: tuple):
    names = sorted(set(action.params) | set(_vars(action.pre.P)))
    for theta in _assignments(names, universe, {}):
        if not _contained(action.pre.P, theta, have):
            continue
        if any(_has_instance(n, theta, have, universe) for n in action.pre.N):
            continue
        yield theta


def _apply(key: tuple, choice, theta: dict) -> tuple:
    have = Counter(key)
    have.subtract(_subst(f, theta) for f in choice.pre.P)
    have.update(_subst(f, theta) for f in choice.eff.P)
    return tuple(sorted(have.elements()))


def _reward(key: tuple, dom, universe: tuple) -> tuple[float, bool]:
    d = [Fluent(s, a) for s, a in key]
    for rule in dom.reward.rules:
        if brute_force_member(d, rule.condition, universe):
            return rule.value, rule.absorbing
    return dom.reward.default, False


def _universe(dom, initial) -> tuple:
    objs = set(dom.constants())
    for d in initial:
        for f in d:
            objs.update(f.args)
    return tuple(sorted(objs))


def enumerate_reachable(dom, initial_states: Iterable, universe: Optional[Iterable[str]] = None,
                        max_states: int = MAX_GROUND_STATES) -> GroundMDP:
    """Breadth-first enumeration of the ground states reachable from ``initial_states``.

    Absorbing states are not expanded. The universe defaults to the constants
    of the domain and the initial states.
    """
    initial_states = list(initial_states)
    universe = tuple(sorted(universe)) if universe is not None else _universe(dom, initial_states)
    index: dict = {}
    keys: list = []
    queue: deque = deque()

    def add(key):
        i = index.get(key)
        if i is None:
            if len(keys) >= max_states:
                raise RuntimeError(f"more than {max_states} reachable ground states")
            i = index[key] = len(keys)
            keys.append(key)
            queue.append(i)
        return i

    initial = [add(_key(d)) for d in initial_states]
    rewards, absorbing, options = {}, {}, {}
    while queue:
        i = queue.popleft()
        key = keys[i]
        rewards[i], absorbing[i] = _reward(key, dom, universe)
        opts = []
        if not absorbing[i]:
            have = Counter(key)
            for a in dom.actions:
                for theta in _ground_actions(a, have, universe):
                    outs = [(c.name, c.prob, add(_apply(key, c, theta))) for c in a.choices]
                    opts.append(GroundOption(a.name, Substitution(theta), a.cost, outs))
        options[i] = opts
    n = len(keys)
    states = [GroundState(Fluent(s, a) for s, a in k) for k in keys]
    return GroundMDP(dom.gamma, universe, states, [rewards[i] for i in range(n)],
                     [absorbing[i] for i in range(n)], [options[i] for i in range(n)], initial, index)


# --- dynamic programming --------------------------------------------------------

def _upper_bound(m: GroundMDP) -> float:
    r_abs = max([r for r, a in zip(m.rewards, m.absorbing) if a], default=-math.inf)
    r_na = max([r for r, a in zip(m.rewards, m.absorbing) if not a], default=-math.inf)
    c = max([o.cost for opts in m.options for o in opts], default=-math.inf)
    if m.gamma < 1:
        grow = (r_na + c) / (1 - m.gamma)
    else:
        grow = -math.inf if r_na + c <= 0 else math.inf
    return max(r_abs, r_na, grow)


def _q(m: GroundMDP, i: int, o: GroundOption, V: np.ndarray) -> float:
    return m.rewards[i] + o.cost + m.gamma * sum(p * V[j] for _, p, j in o.outcomes)


def greedy_policy(m: GroundMDP, V: np.ndarray) -> list:
    out = []
    for i, opts in enumerate(m.options):
        if m.absorbing[i] or not opts:
            out.append(None)
            continue
        qs = [_q(m, i, o, V) for o in opts]
        out.append(int(np.argmax(qs)))
    return out


def value_iteration(m: GroundMDP, epsilon: float = 1e-10, max_iters: int = 1_000_000) -> OracleSolution:
    """Jacobi value iteration started from an upper bound on V*."""
    U = _upper_bound(m)
    if not math.isfinite(U):
        raise ValueError("no finite upper bound on values (positive step reward with gamma = 1)")
    V = np.array([r if (a or not opts) else U
                  for r, a, opts in zip(m.rewards, m.absorbing, m.options)], dtype=float)
    residual = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        new = V.copy()
        for i, opts in enumerate(m.options):
            if opts and not m.absorbing[i]:
                new[i] = max(_q(m, i, o, V) for o in opts)
        residual = float(np.max(np.abs(new - V))) if len(V) else 0.0
        V = new
        if residual <= epsilon:
            break
    converged = residual <= epsilon
    if not converged:
        log.warning("ground value iteration did not converge (residual %.3g)", residual)
    return OracleSolution(V, greedy_policy(m, V), it, residual, converged)


def policy_evaluation(m: GroundMDP, policy: list) -> np.ndarray:
    """Exact value of a stationary policy (option index or None per state) by a linear solve."""
    n = len(m)
    A = np.eye(n)
    b = np.zeros(n)
    for i in range(n):
        k = policy[i]
        if m.absorbing[i] or k is None:
            b[i] = m.rewards[i]
            continue
        o = m.options[i][k]
        b[i] = m.rewards[i] + o.cost
        for _, p, j in o.outcomes:
            A[i, j] -= m.gamma * p
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise ValueError("policy never terminates from some state (singular system)") from exc


def bellman_residuals(m: GroundMDP, V: np.ndarray) -> np.ndarray:
    out = np.zeros(len(m))
    for i, opts in enumerate(m.options):
        if m.absorbing[i] or not opts:
            out[i] = abs(V[i] - m.rewards[i])
        else:
            out[i] = abs(V[i] - max(_q(m, i, o, V) for o in opts))
    return out


def reachable_under(m: GroundMDP, policy: list) -> list[int]:
    """Indices reachable from the initial states following ``policy``."""
    seen = dict.fromkeys(m.initial)
    queue = deque(seen)
    while queue:
        i = queue.popleft()
        k = policy[i]
        if k is None:
            continue
        for _, p, j in m.options[i][k].outcomes:
            if p > 0 and j not in seen:
                seen[j] = None
                queue.append(j)
    return list(seen)


def option_index(m: GroundMDP, i: int, action: str, theta) -> Optional[int]:
    theta = Substitution(theta)
    for k, o in enumerate(m.options[i]):
        if o.action == action and all(theta.get(v) == t for v, t in o.theta.items()):
            return k
    return None


def cross_validate(V_abstract, m: GroundMDP, tolerance: float = 1e-3,
                   V_ground: Optional[np.ndarray] = None, states: Optional[Iterable[int]] = None) -> CrossValidationReport:
    """Compare an abstract value function with ground V* state by state.

    ``V_abstract`` is a ValueFunction or any callable from a ground state to a
    value. Deviations are ``abstract - ground``; the report lists states whose
    absolute deviation exceeds ``tolerance``.
    """
    if V_ground is None:
        V_ground = value_iteration(m).V
    f: Callable = V_abstract.lookup_ground if hasattr(V_abstract, "lookup_ground") else V_abstract
    idx = range(len(m)) if states is None else list(states)
    worst, low, offenders, n = 0.0, math.inf, [], 0
    for i in idx:
        a = float(f(m.states[i]))
        g = float(V_ground[i])
        dev = a - g
        n += 1
        worst = max(worst, abs(dev))
        low = min(low, dev)
        if abs(dev) > tolerance:
            offenders.append((m.states[i], a, g))
    return CrossValidationReport(n, worst, low if n else 0.0, offenders, tolerance)


def ground_value_function(m: GroundMDP, V: np.ndarray):
    """Oracle values as a ValueFunction over lifted ground states, for diffing with solver output."""
    from .fovia import ValueFunction

    return ValueFunction([(CNState(d), float(v)) for d, v in zip(m.states, V)], default=0.0)


def ground_policy_lines(m: GroundMDP, policy: list) -> str:
    out = []
    for i, (d, k) in enumerate(zip(m.states, policy)):
        if k is not None:
            o = m.options[i][k]
            out.append(f"{d}\t{o.action}\t{o.theta}")
    return "\n".join(out) + ("\n" if out else "")
