"""FOLAO*: heuristic search over abstract (CN-state) MDPs.

The search keeps an explicit graph ``G`` of canonical states, grows the envelope
``E`` reachable under the current greedy policy, and runs FOVIA on ``E`` with
fringe values supplied by an admissible heuristic.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .fovia import (
    DEFAULT_EPSILON,
    PolicyEntry,
    TransitionModel,
    ValueFunction,
    extract_policy,
    fovia_loop,
)
from .terms import CNState, FluentTerm, canonicalize, iter_matches, subsumes
from .actions import regress

log = logging.getLogger(__name__)

MAX_HEURISTIC_STATES = 5000


@dataclass
class SolveConfig:
    epsilon: float = DEFAULT_EPSILON
    gamma: Optional[float] = None
    heuristic_sweeps: int = 5
    max_outer_iters: int = 1000
    max_fovia_iters: int = 1000
    max_heuristic_states: int = MAX_HEURISTIC_STATES

    def validate(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.gamma is not None and not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.heuristic_sweeps < 0:
            raise ValueError("heuristic_sweeps must be non-negative")
        if self.max_outer_iters < 1 or self.max_fovia_iters < 1:
            raise ValueError("iteration limits must be positive")


@dataclass
class SolveResult:
    policy: list
    V: ValueFunction
    heuristic: ValueFunction
    stats: dict
    converged: bool


def with_gamma(dom, gamma: Optional[float]):
    if gamma is None or gamma == dom.gamma:
        return dom
    out = dataclasses.replace(dom, gamma=gamma)
    out.validate()
    return out


def abstract_initial_states(problem) -> list[CNState]:
    """Lift each ground initial state to a CN-state with no negated part."""
    out = {}
    for d in problem.initial_states:
        out.setdefault(canonicalize(CNState(d)), None)
    return list(out)


# --- reachability invariants ---------------------------------------------------

def _symbol_delta(choice) -> Counter:
    d = Counter(f.symbol for f in choice.eff.P)
    d.subtract(f.symbol for f in choice.pre.P)
    return d


def static_symbols(dom) -> set[str]:
    """Symbols whose fluents every nature's choice removes and re-adds verbatim."""
    out = {s for s, _ in dom.fluents}
    for a in dom.actions:
        for c in a.choices:
            pre = [f for f in c.pre.P]
            eff = [f for f in c.eff.P]
            for f in pre + eff:
                if pre.count(f) != eff.count(f):
                    out.discard(f.symbol)
    return out


def count_invariants(dom, max_size: int = 3) -> list[frozenset]:
    """Symbol sets whose total fluent count no choice changes (unit-weight place invariants)."""
    symbols = sorted(s for s, _ in dom.fluents)
    deltas = [_symbol_delta(c) for a in dom.actions for c in a.choices]
    out = []
    for size in range(1, max_size + 1):
        for combo in itertools.combinations(symbols, size):
            if any(set(combo) > inv for inv in out):
                continue  # sums of smaller invariants add nothing new
            if all(sum(d[s] for s in combo) == 0 for d in deltas):
                out.append(frozenset(combo))
    return out


class ReachabilityFilter:
    """Necessary conditions for a CN-state to contain a state reachable from ``initial``.

    Static fluents must match into some initial state, and the positive part
    may not need more fluents of an invariant symbol set than that state has.
    """

    def __init__(self, dom, initial: Iterable):
        self.static = static_symbols(dom)
        self.invariants = count_invariants(dom)
        self.initial = []
        for d in initial:
            counts = Counter(f.symbol for f in d)
            totals = [sum(counts[s] for s in inv) for inv in self.invariants]
            static = FluentTerm([f for f in d if f.symbol in self.static])
            self.initial.append((totals, static))

    def possible(self, z: CNState) -> bool:
        counts = Counter(f.symbol for f in z.P)
        need = [sum(counts[s] for s in inv) for inv in self.invariants]
        static = [f for f in z.P if f.symbol in self.static]
        for totals, d_static in self.initial:
            if any(n > t for n, t in zip(need, totals)):
                continue
            if next(iter_matches(static, d_static), None) is not None:
                return True
        return False


# --- heuristic ----------------------------------------------------------------

def value_bounds(dom, k: int) -> list[float]:
    """``[B_0, ..., B_{k+1}]``: B_0 bounds every state, B_j every state that
    cannot reach an absorbing reward state in fewer than j steps."""
    rules = dom.reward.rules
    r_abs = max([r.value for r in rules if r.absorbing], default=-math.inf)
    r_na = max([dom.reward.default] + [r.value for r in rules if not r.absorbing])
    c_max = max([a.cost for a in dom.actions], default=-math.inf)
    step = r_na + c_max
    if dom.gamma < 1:
        accrue = step / (1 - dom.gamma)
    else:
        accrue = -math.inf if step <= 0 else math.inf
    B = [max(r_abs, r_na, accrue)]
    for _ in range(k + 1):
        B.append(max(r_na, step + dom.gamma * B[-1]))
    return B


def make_heuristic(dom, k: int = 5, max_states: int = MAX_HEURISTIC_STATES,
                   initial_states: Optional[Iterable] = None) -> tuple[ValueFunction, dict]:
    """Admissible decision-list heuristic from ``k`` rounds of positive regression.

    Layer 0 holds the conditions of absorbing reward rules; layer j the
    regressions of layer j-1 through every nature's choice. A state first found
    in layer j can need j steps to reach a goal, so it gets the optimistic
    bound B_j; states in no layer get B_{k+1}.

    With ``initial_states`` the layers skip states that no ground state
    reachable from them can satisfy, so the bound holds on reachable states only.
    """
    t0 = time.perf_counter()
    filt = ReachabilityFilter(dom, initial_states) if initial_states is not None else None
    pruned = 0
    B = value_bounds(dom, k)
    layer = []
    kept: list[CNState] = []
    seen: set = set()
    for rule in dom.reward.rules:
        if rule.absorbing:
            z = canonicalize(CNState(rule.condition.P))
            if not any(subsumes(s, z) for s in kept):
                kept.append(z)
                layer.append(z)
    entries = [(z, B[0]) for z in layer]
    sizes = [len(layer)]
    default = B[1] if entries or not dom.reward.has_absorbing else B[0]
    complete = 0
    choices = [c for a in dom.actions for c in a.choices if not c.is_noop]
    for j in range(1, k + 1):
        new = []
        overflow = False
        for z in layer:
            for c in choices:
                for r in regress(z, c):
                    if filt is not None and not filt.possible(r):
                        pruned += 1
                        continue
                    if r in seen or any(subsumes(s, r) for s in kept):
                        seen.add(r)
                        continue
                    seen.add(r)
                    kept.append(r)
                    new.append(r)
                    if len(kept) > max_states:
                        overflow = True
                        break
                if overflow:
                    break
            if overflow:
                break
        if overflow:
            log.warning("heuristic regression stopped at layer %d after %d states", j, max_states)
            default = B[j]
            break
        entries += [(z, B[j]) for z in new]
        sizes.append(len(new))
        complete = j
        default = B[j + 1]
        layer = new
        if not new:
            break
    stats = {
        "abstract_states": len(entries),
        "layer_sizes": sizes,
        "complete_layers": complete,
        "pruned": pruned,
        "bounds": B,
        "time": time.perf_counter() - t0,
    }
    return ValueFunction(entries, default), stats


# --- search -------------------------------------------------------------------

def policy_expansion(pi: dict, S0: Iterable[CNState], G: set, model: TransitionModel,
                     witness: Optional[dict] = None):
    """Grow the envelope reachable from ``S0`` under ``pi`` inside ``G``.

    Returns ``(E, F, G')`` where ``F`` are newly reached states outside ``G``;
    both are added to ``E`` and ``G'``.
    """
    witness = {} if witness is None else witness
    E: dict[CNState, None] = {}
    F: dict[CNState, None] = {}
    frm = list(dict.fromkeys(S0))
    while frm:
        to: dict[CNState, None] = {}
        for z in frm:
            entry = pi.get(z)
            if entry is None:
                if not model.is_absorbing(z) and not model.options(z):
                    log.debug("dead end in envelope: %s", z)
                continue
            for _, s in model.outcomes(z, entry.action, entry.theta):
                to.setdefault(s, None)
                witness.setdefault(s, z)
        for s in to:
            if s not in G:
                F.setdefault(s, None)
        E.update(dict.fromkeys(frm))
        frm = [s for s in to if s in G and s not in E]
    E.update(F)
    return list(E), list(F), G | set(F)


def _initial_policy(states, model: TransitionModel) -> dict:
    pi = {}
    for z in states:
        if model.is_absorbing(z):
            continue
        opts = model.options(z)
        if opts:
            pi[z] = PolicyEntry(z, opts[0].action.name, opts[0].theta)
    return pi


def folao(dom, S0: Iterable[CNState], config: Optional[SolveConfig] = None,
          heuristic: Optional[ValueFunction] = None) -> SolveResult:
    config = config or SolveConfig()
    config.validate()
    dom = with_gamma(dom, config.gamma)
    t0 = time.perf_counter()
    S0 = [canonicalize(z) for z in S0]
    hstats = {}
    if heuristic is None:
        heuristic, hstats = make_heuristic(dom, config.heuristic_sweeps, config.max_heuristic_states,
                                           initial_states=[z.P for z in S0] if all(
                                               z.is_ground_positive() for z in S0) else None)
    model = TransitionModel(dom)
    V = ValueFunction(base=heuristic)
    G = set(S0)
    pi = _initial_policy(S0, model)
    witness: dict = {}
    stats = {
        "graph_sizes": [],
        "envelope_sizes": [],
        "fringe_sizes": [],
        "fovia_sweeps": [],
        "residuals": [],
        "policy_changes": [],
    }
    converged = False
    policy = []
    r = math.inf
    it = 0
    for it in range(1, config.max_outer_iters + 1):
        E, F, G = policy_expansion(pi, S0, G, model, witness)
        res = fovia_loop(E, V, config.epsilon, config.max_fovia_iters, model=model)
        r = res.residual
        changed = 0
        for e in res.policy:
            if pi.get(e.state) != e:
                changed += 1
            pi[e.state] = e
        stats["graph_sizes"].append(len(G))
        stats["envelope_sizes"].append(len(E))
        stats["fringe_sizes"].append(len(F))
        stats["fovia_sweeps"].append(res.sweeps)
        stats["residuals"].append(r)
        stats["policy_changes"].append(changed)
        log.info("iteration %d: |G|=%d |E|=%d |F|=%d sweeps=%d r=%.3g changed=%d",
                 it, len(G), len(E), len(F), res.sweeps, r, changed)
        # a policy change can lead into stale parts of G, so expand again
        if not F and not changed and r <= config.epsilon:
            converged = True
            policy = res.policy
            break
        policy = res.policy
    if not converged:
        log.warning("FOLAO* stopped after %d iterations without converging (r=%.3g)", it, r)
    stats.update(
        outer_iterations=it,
        expanded_states=len(G),
        envelope_states=stats["envelope_sizes"][-1] if stats["envelope_sizes"] else 0,
        total_sweeps=sum(stats["fovia_sweeps"]),
        abstract_states=hstats.get("abstract_states", len(heuristic.own_states())),
        heuristic=hstats,
        theta_counts=dict(model.theta_counts),
        residual=r,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        witnesses=len(witness),
    )
    stats["parents"] = witness
    return SolveResult(policy, V, heuristic, stats, converged)


def reachable_states(S0: Iterable[CNState], model: TransitionModel, limit: int = 200_000) -> list[CNState]:
    """All canonical states reachable from ``S0`` under any action (absorbing states are not expanded)."""
    seen = dict.fromkeys(canonicalize(z) for z in S0)
    queue = list(seen)
    while queue:
        z = queue.pop()
        if model.is_absorbing(z):
            continue
        for o in model.options(z):
            for _, s in o.outcomes:
                if s not in seen:
                    seen[s] = None
                    queue.append(s)
                    if len(seen) > limit:
                        raise RuntimeError(f"more than {limit} reachable abstract states")
    return list(seen)


def exhaustive_fovia(dom, S0: Iterable[CNState], config: Optional[SolveConfig] = None) -> SolveResult:
    """FOVIA over every reachable abstract state, with the constant upper bound as initial values."""
    config = config or SolveConfig()
    config.validate()
    dom = with_gamma(dom, config.gamma)
    t0 = time.perf_counter()
    model = TransitionModel(dom)
    states = reachable_states(S0, model)
    h = ValueFunction(default=value_bounds(dom, 0)[0])
    V = ValueFunction(base=h)
    res = fovia_loop(states, V, config.epsilon, config.max_fovia_iters, model=model)
    converged = res.residual <= config.epsilon
    stats = {
        "reachable_states": len(states),
        "total_sweeps": res.sweeps,
        "residual": res.residual,
        "converged": converged,
        "wall_time": time.perf_counter() - t0,
        "theta_counts": dict(model.theta_counts),
    }
    return SolveResult(res.policy, V, h, stats, converged)
