"""First-order value iteration over CN-states.

Values live in a :class:`ValueFunction`, a decision list of canonical CN-states.
Backups are Jacobi sweeps: every Q-value in a sweep reads the values as they
were when the sweep started.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

from .actions import StochasticAction, reward, succ, forward_applicable
from .terms import CNState, FluentTerm, Substitution, canonicalize, ground_membership, subsumes

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-4
DEFAULT_MAX_ITERS = 1000


class ValueFunction:
    """Ordered list of ``(canonical CN-state, value)`` entries plus a default.

    Lookup tries an exact canonical match, then the first entry (in list order)
    that subsumes the query, then the default. ``base`` chains a second value
    function (typically the heuristic) that is consulted after this one's own
    entries; it must not be modified while chained.
    """

    def __init__(self, entries: Iterable[tuple[CNState, float]] = (), default: float = 0.0,
                 base: Optional["ValueFunction"] = None):
        self._values: dict[CNState, float] = {}
        for z, v in entries:
            self[z] = v
        self.default = default if base is None else base.default
        self.base = base
        self._subsumed_cache: dict[CNState, float] = {}

    def __setitem__(self, z: CNState, value: float) -> None:
        self._values[canonicalize(z)] = float(value)

    def __contains__(self, z: CNState) -> bool:
        return canonicalize(z) in self._values

    def __len__(self) -> int:
        return len(self._values) + (len(self.base) if self.base is not None else 0)

    def own_states(self) -> list[CNState]:
        return list(self._values)

    def exact(self, z: CNState) -> Optional[float]:
        v = self._values.get(z)
        if v is None and self.base is not None:
            return self.base.exact(z)
        return v

    def _first_subsuming(self, z: CNState) -> Optional[float]:
        for s, v in self._values.items():
            if len(s.P) <= len(z.P) and subsumes(s, z):
                return v
        return None

    def lookup(self, z: CNState) -> float:
        z = canonicalize(z)
        v = self.exact(z)
        if v is not None:
            return v
        v = self._first_subsuming(z)
        if v is not None:
            return v
        if self.base is not None:
            return self.base._lookup_subsuming_cached(z)
        return self.default

    def _lookup_subsuming_cached(self, z: CNState) -> float:
        # only used on chained bases, which are frozen
        v = self._subsumed_cache.get(z)
        if v is None:
            v = self._first_subsuming(z)
            if v is None:
                v = self.base._lookup_subsuming_cached(z) if self.base is not None else self.default
            self._subsumed_cache[z] = v
        return v

    def covering_entry(self, d: FluentTerm) -> Optional[tuple[CNState, float]]:
        """First entry whose extension contains the ground state ``d``."""
        lifted = CNState(d)
        v = self.exact(lifted)
        if v is not None:
            return lifted, v
        for s, v in self._values.items():
            if ground_membership(d, s):
                return s, v
        if self.base is not None:
            return self.base.covering_entry(d)
        return None

    def lookup_ground(self, d: FluentTerm) -> float:
        hit = self.covering_entry(d)
        return self.default if hit is None else hit[1]

    def entries(self) -> list[tuple[CNState, float]]:
        """Flattened decision list (own entries first, then the base's)."""
        out = list(self._values.items())
        if self.base is not None:
            seen = set(self._values)
            out += [(s, v) for s, v in self.base.entries() if s not in seen]
        return out

    def flattened(self) -> "ValueFunction":
        return ValueFunction(self.entries(), self.default)


class PolicyEntry(NamedTuple):
    state: CNState
    action: str
    theta: Substitution


@dataclass
class BackupResult:
    V: ValueFunction
    policy: list
    residual: float
    sweeps: int = 1


class Option(NamedTuple):
    action: StochasticAction
    theta: Substitution
    outcomes: tuple  # ((prob, successor CN-state), ...)


class TransitionModel:
    """Memoizes rewards and applicable (action, θ, outcome) lists per canonical state."""

    def __init__(self, dom):
        self.dom = dom
        self._options: dict[CNState, list[Option]] = {}
        self._reward: dict[CNState, tuple[float, bool]] = {}
        self.theta_counts: dict[str, int] = {}

    @property
    def gamma(self) -> float:
        return self.dom.gamma

    def reward(self, z: CNState) -> tuple[float, bool]:
        hit = self._reward.get(z)
        if hit is None:
            rule = self.dom.reward.match(z)
            hit = (self.dom.reward.default, False) if rule is None else (rule.value, rule.absorbing)
            self._reward[z] = hit
        return hit

    def is_absorbing(self, z: CNState) -> bool:
        return self.reward(z)[1]

    def options(self, z: CNState) -> list[Option]:
        opts = self._options.get(z)
        if opts is None:
            opts = []
            for a in self.dom.actions:
                thetas = forward_applicable(z, a)
                self.theta_counts[a.name] = self.theta_counts.get(a.name, 0) + len(thetas)
                for theta in thetas:
                    outs = tuple((c.prob, succ(z, c, theta)) for c in a.choices)
                    opts.append(Option(a, theta, outs))
            self._options[z] = opts
        return opts

    def outcomes(self, z: CNState, action_name: str, theta: Substitution) -> tuple:
        for o in self.options(z):
            if o.action.name == action_name and o.theta == theta:
                return o.outcomes
        a = self.dom.action(action_name)
        return tuple((c.prob, succ(z, c, theta)) for c in a.choices)

    @property
    def n_states(self) -> int:
        return len(self._options)


def _q(model: TransitionModel, z: CNState, opt: Option, V: ValueFunction) -> float:
    r, _ = model.reward(z)
    return r + opt.action.cost + model.gamma * sum(p * V.lookup(s) for p, s in opt.outcomes)


def q_value(z: CNState, action: StochasticAction, theta, V: ValueFunction, dom,
            model: Optional[TransitionModel] = None) -> float:
    """reward(Z) + cost(a) + γ Σ_j prob_j · V(succ(Z, a_j, θ)); absorbing states return their reward."""
    model = model or TransitionModel(dom)
    z = canonicalize(z)
    r, absorbing = model.reward(z)
    if absorbing:
        return r
    theta = Substitution(theta)
    if theta not in forward_applicable(z, action):
        raise ValueError(f"{action.name} is not applicable to {z} with {theta}")
    outs = tuple((c.prob, succ(z, c, theta)) for c in action.choices)
    return _q(model, z, Option(action, theta, outs), V)


def _best(model: TransitionModel, z: CNState, V: ValueFunction):
    r, absorbing = model.reward(z)
    if absorbing:
        return r, None
    best_v, best_o = None, None
    for o in model.options(z):
        q = _q(model, z, o, V)
        if best_v is None or q > best_v:
            best_v, best_o = q, o
    if best_o is None:
        return r, None  # dead end
    return best_v, best_o


def backup(E: Iterable[CNState], V: ValueFunction, dom=None, model: Optional[TransitionModel] = None) -> BackupResult:
    """One Jacobi sweep over ``E``; writes the new values into ``V``."""
    model = model or TransitionModel(dom)
    E = [canonicalize(z) for z in E]
    new = {}
    policy = []
    residual = 0.0
    for z in E:
        v, o = _best(model, z, V)
        new[z] = v
        if o is not None:
            policy.append(PolicyEntry(z, o.action.name, o.theta))
        old = V.lookup(z)
        residual = max(residual, abs(v - old)) if math.isfinite(old) else math.inf
    for z, v in new.items():
        V[z] = v
    return BackupResult(V, policy, residual)


def extract_policy(V: ValueFunction, dom=None, states: Optional[Iterable[CNState]] = None,
                   model: Optional[TransitionModel] = None) -> list[PolicyEntry]:
    """Greedy policy w.r.t. ``V``; ties go to declaration order, then θ order."""
    model = model or TransitionModel(dom)
    states = V.own_states() if states is None else [canonicalize(z) for z in states]
    out = []
    for z in states:
        _, o = _best(model, z, V)
        if o is not None:
            out.append(PolicyEntry(z, o.action.name, o.theta))
    return out


def fovia_loop(E: Iterable[CNState], V: ValueFunction, epsilon: float = DEFAULT_EPSILON,
               max_iters: int = DEFAULT_MAX_ITERS, dom=None,
               model: Optional[TransitionModel] = None) -> BackupResult:
    """Repeat ``backup`` on ``E`` until the residual is at most ``epsilon``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    model = model or TransitionModel(dom)
    E = [canonicalize(z) for z in E]
    r = math.inf
    sweeps = 0
    for sweeps in range(1, max_iters + 1):
        r = backup(E, V, model=model).residual
        if r <= epsilon:
            break
    else:
        sweeps = max_iters
    policy = extract_policy(V, states=E, model=model)
    return BackupResult(V, policy, r, sweeps)


# --- line format --------------------------------------------------------------

def format_values(V: ValueFunction) -> str:
    lines = [f"{s}\t{v!r}" for s, v in V.entries()]
    lines.append(f"default\t{V.default!r}")
    return "\n".join(lines) + "\n"


def parse_values(text: str) -> ValueFunction:
    from .domain_io import parse_cnstate

    entries = []
    default = 0.0
    for i, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        state, _, value = line.rpartition("\t")
        if state == "default":
            default = float(value)
        else:
            entries.append((parse_cnstate(state, i), float(value)))
    return ValueFunction(entries, default)


def format_policy(policy: Iterable[PolicyEntry]) -> str:
    return "".join(f"{e.state}\t{e.action}\t{e.theta}\n" for e in policy)


def parse_policy(text: str) -> list[PolicyEntry]:
    from .domain_io import parse_cnstate, parse_substitution

    out = []
    for i, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        state, action, theta = line.split("\t")
        out.append(PolicyEntry(canonicalize(parse_cnstate(state, i)), action, parse_substitution(theta)))
    return out
