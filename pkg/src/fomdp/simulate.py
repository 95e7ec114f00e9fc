"""Monte-Carlo execution of abstract policies on ground states."""
from __future__ import annotations

import math
import statistics
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .actions import NotApplicable, ground_apply
from .fovia import PolicyEntry
from .terms import CNState, FluentTerm, Substitution, apply_substitution, iter_matches

DEFAULT_RUNS = 30
DEFAULT_CAP = 1000
RNG_ALGORITHM = "PCG64"


class PolicyTable:
    """Policy lookup for ground states: exact lift match, else first covering entry."""

    def __init__(self, policy: Iterable[PolicyEntry]):
        self.entries = list(policy)
        self._exact = {}
        for e in self.entries:
            self._exact.setdefault(e.state, e)

    def __len__(self) -> int:
        return len(self.entries)

    def _witness(self, d: FluentTerm, z: CNState) -> Optional[dict]:
        for theta in iter_matches(z.P, d):
            if all(next(iter_matches(apply_substitution(n, theta), d), None) is None for n in z.N):
                return theta
        return None

    def cover(self, d: FluentTerm) -> Optional[tuple[PolicyEntry, dict]]:
        e = self._exact.get(CNState(d))
        if e is not None:
            return e, {}
        for e in self.entries:
            theta = self._witness(d, e.state)
            if theta is not None:
                return e, theta
        return None

    def ground_action(self, d: FluentTerm) -> Optional[tuple[str, Substitution]]:
        """The entry's action with its substitution pushed through to ``d``'s objects."""
        hit = self.cover(d)
        if hit is None:
            return None
        e, theta_d = hit
        return e.action, Substitution({v: theta_d.get(t, t) for v, t in e.theta.items()})


@dataclass
class RunRecord:
    steps: int
    terminal: str  # goal | dead-end | step-cap
    reward: float


@dataclass
class SimulationSummary:
    runs: int
    mean: float
    stdev: float
    min: float
    max: float
    seed: int
    cap: int
    records: list = field(repr=False, default_factory=list)
    choice_counts: Counter = field(repr=False, default_factory=Counter)
    rng: str = RNG_ALGORITHM

    @property
    def stderr(self) -> float:
        return self.stdev / math.sqrt(self.runs) if self.runs else math.nan

    @property
    def terminals(self) -> Counter:
        return Counter(r.terminal for r in self.records)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("runs", "mean", "stdev", "min", "max", "seed", "cap", "rng")}
        out["stderr"] = self.stderr
        out.update({f"terminal_{k}": v for k, v in sorted(self.terminals.items())})
        return out


def run_generator(seed: int, run: int) -> np.random.Generator:
    """Per-run generator; depends only on (seed, run) so runs can execute in any order."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, run])))


def _sample(rng: np.random.Generator, choices) -> int:
    u = rng.random()
    acc = 0.0
    for k, c in enumerate(choices):
        acc += c.prob
        if u < acc:
            return k
    return len(choices) - 1


def run_once(table: PolicyTable, d: FluentTerm, dom, cap: int, rng: np.random.Generator,
             counts: Optional[Counter] = None) -> RunRecord:
    total = 0.0
    steps = 0
    while True:
        rule = dom.reward.match_ground(d)
        if rule is not None and rule.absorbing:
            return RunRecord(steps, "goal", total + rule.value)
        if steps >= cap:
            return RunRecord(steps, "step-cap", total)
        r = dom.reward.default if rule is None else rule.value
        ga = table.ground_action(d)
        if ga is None:
            return RunRecord(steps, "dead-end", total + r)
        action = dom.action(ga[0])
        k = _sample(rng, action.choices)
        choice = action.choices[k]
        try:
            d = ground_apply(d, choice, ga[1])
        except NotApplicable:
            return RunRecord(steps, "dead-end", total + r)
        if counts is not None:
            counts[(action.name, choice.name)] += 1
        total += r + action.cost
        steps += 1


def simulate(policy, problem, dom, runs: int = DEFAULT_RUNS, cap: Optional[int] = None,
             seed: int = 0) -> SimulationSummary:
    """Execute ``runs`` independent episodes and summarize the accumulated reward.

    Run ``i`` starts from initial state ``i mod |S0|`` and draws nature's
    choices from a PCG64 generator seeded with ``(seed, i)``. A run ends at an
    absorbing state (its reward is added), at a state with no covering policy
    entry, or after ``cap`` steps.
    """
    if runs < 1:
        raise ValueError("runs must be positive")
    cap = problem.horizon if cap is None else cap
    if cap < 0:
        raise ValueError("cap must be non-negative")
    table = policy if isinstance(policy, PolicyTable) else PolicyTable(policy)
    counts: Counter = Counter()
    records = []
    for i in range(runs):
        d = problem.initial_states[i % len(problem.initial_states)]
        records.append(run_once(table, d, dom, cap, run_generator(seed, i), counts))
    rewards = [r.reward for r in records]
    stdev = statistics.stdev(rewards) if len(rewards) > 1 else 0.0
    return SimulationSummary(runs, statistics.fmean(rewards), stdev, min(rewards), max(rewards),
                             seed, cap, records, counts)
