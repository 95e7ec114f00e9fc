"""Stochastic actions, applicability, successor/predecessor operators and rewards."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .terms import (
    CNState,
    FluentTerm,
    GroundState,
    Substitution,
    apply_substitution,
    canonicalize,
    ground_membership,
    is_variant,
    iter_matches,
    match_into,
    negation_implied,
    rename_locals_apart,
    resolve,
    subsumes,
    unify_fluents,
)

PROB_TOLERANCE = 1e-9


class NotApplicable(ValueError):
    """Raised when an operator is used with a substitution that does not apply."""


@dataclass(frozen=True)
class NatureChoice:
    name: str
    params: tuple
    pre: CNState
    eff: CNState
    prob: float

    def variables(self) -> set[str]:
        return set(self.params) | self.pre.p_vars() | self.eff.p_vars()

    @property
    def is_noop(self) -> bool:
        return self.pre == self.eff


@dataclass(frozen=True)
class StochasticAction:
    name: str
    params: tuple
    choices: tuple
    cost: float = 0.0

    @property
    def pre(self) -> CNState:
        return self.choices[0].pre

    def variables(self) -> set[str]:
        out = set(self.params)
        for c in self.choices:
            out |= c.variables()
        return out

    def validate(self) -> None:
        if not self.choices:
            raise ValueError(f"action {self.name} has no nature's choices")
        total = sum(c.prob for c in self.choices)
        if abs(total - 1.0) > PROB_TOLERANCE:
            raise ValueError(f"action {self.name}: probabilities sum to {total:g}")
        pre_vars = self.pre.p_vars()
        for p in self.params:
            if p not in pre_vars:
                raise ValueError(f"action {self.name}: parameter {p} does not occur in the precondition")
        for c in self.choices:
            if not 0.0 <= c.prob <= 1.0:
                raise ValueError(f"choice {c.name}: probability {c.prob} outside [0, 1]")
            if c.pre != self.pre:
                raise ValueError(f"action {self.name}: choices must share one precondition")
            extra = c.eff.p_vars() - pre_vars
            if extra:
                raise ValueError(f"choice {c.name}: effect variables {sorted(extra)} not bound by the precondition")
            carried = [m for m in c.pre.N]
            for n in c.eff.N:
                if c.is_noop or any(is_variant(n, m, pre_vars) for m in carried):
                    continue
                if _reestablishable(n, c.eff.P, pre_vars):
                    raise ValueError(f"choice {c.name}: negated effect {n} may coincide with a positive effect")
        names = [c.name for c in self.choices]
        if len(set(names)) != len(names):
            raise ValueError(f"action {self.name}: duplicate choice names")


@dataclass(frozen=True)
class RewardRule:
    condition: CNState
    value: float
    absorbing: bool = False


@dataclass(frozen=True)
class RewardModel:
    """Ordered reward rules evaluated first-match, with a default value."""

    rules: tuple = ()
    default: float = 0.0

    def match(self, z: CNState) -> Optional[RewardRule]:
        for rule in self.rules:
            if subsumes(rule.condition, z):
                return rule
        return None

    def match_ground(self, d: FluentTerm) -> Optional[RewardRule]:
        for rule in self.rules:
            if ground_membership(d, rule.condition):
                return rule
        return None

    @property
    def r_max(self) -> float:
        return max([self.default] + [r.value for r in self.rules])

    @property
    def has_absorbing(self) -> bool:
        return any(r.absorbing for r in self.rules)


@dataclass(frozen=True)
class ApplicabilityResult:
    theta: Substitution
    outcomes: tuple = field(default=())  # (NatureChoice, CNState) per choice


def reward(z: CNState, model: RewardModel) -> float:
    rule = model.match(z)
    return model.default if rule is None else rule.value


def reward_ground(d: FluentTerm, model: RewardModel) -> float:
    rule = model.match_ground(d)
    return model.default if rule is None else rule.value


# --- applicability ----------------------------------------------------------

def _check_apart(z: CNState, names: Iterable[str]) -> None:
    clash = set(names) & z.variables()
    if clash:
        raise ValueError(f"state and action share variable names {sorted(clash)}; canonicalize the state first")


def _instantiate_members(members: Iterable[FluentTerm], theta) -> list[FluentTerm]:
    bound = set(theta)
    return [apply_substitution(rename_locals_apart(n, bound), theta) for n in members]


def _negations_contained(z: CNState, required: list[FluentTerm]) -> bool:
    shared = z.p_vars()
    return all(any(negation_implied(n, r, shared) for n in z.N) for r in required)


def _applicable(z: CNState, cond: CNState, names) -> list[Substitution]:
    _check_apart(z, names)
    out = []
    for theta in match_into(cond.P, z.P):
        if _negations_contained(z, _instantiate_members(cond.N, theta)):
            out.append(theta)
    return out


def forward_applicable(z: CNState, action: StochasticAction) -> list[Substitution]:
    """All θ for which ``action`` is forward applicable to ``z``, in canonical order.

    The positive precondition must match into the positive part, and every
    negated precondition member must be entailed by a (more general) negated
    member of ``z``.
    """
    return _applicable(z, action.pre, action.variables())


def backward_applicable(z: CNState, action: StochasticAction, choice: NatureChoice) -> list[Substitution]:
    return _applicable(z, choice.eff, action.variables())


def applicable_results(z: CNState, action: StochasticAction) -> list[ApplicabilityResult]:
    out = []
    for theta in forward_applicable(z, action):
        outcomes = tuple((c, succ(z, c, theta)) for c in action.choices)
        out.append(ApplicabilityResult(theta, outcomes))
    return out


# --- successor / predecessor -------------------------------------------------

def _reestablishable(member: FluentTerm, added: FluentTerm, shared: set[str]) -> bool:
    m = rename_locals_apart(member, shared)
    return any(unify_fluents([(f, g)]) is not None for f in m for g in added)


def _drop_dangling(members: list[FluentTerm], old_pvars: set[str], new_p: FluentTerm) -> list[FluentTerm]:
    # a member naming a vanished positive variable would silently become existential
    keep = set(new_p.variables())
    return [n for n in members if not any(v in old_pvars and v not in keep for v in n.variables())]


def succ(z: CNState, choice: NatureChoice, theta, canonical: bool = True) -> CNState:
    """Progress ``z`` through a nature's choice under θ.

    P' = P minus the instantiated positive precondition plus the positive
    effect; N' = N minus members that are variants of instantiated negated
    preconditions, plus the instantiated negated effects. Surviving members of
    N that some added effect fluent could re-establish are dropped.
    """
    pre_p = apply_substitution(choice.pre.P, theta)
    if not pre_p.issubmultiset(z.P):
        raise NotApplicable(f"{choice.name}: precondition {pre_p} not contained in {z.P}")
    if choice.is_noop:
        return canonicalize(z) if canonical else z
    eff_p = apply_substitution(choice.eff.P, theta)
    new_p = (z.P - pre_p) + eff_p
    shared = z.p_vars()
    pre_n = _instantiate_members(choice.pre.N, theta)
    eff_n = _instantiate_members(choice.eff.N, theta)
    kept = [n for n in z.N if not any(is_variant(n, m, shared) for m in pre_n)]
    kept = [n for n in kept if not _reestablishable(n, eff_p, shared)]
    members = _drop_dangling(kept + eff_n, shared, new_p)
    out = CNState(new_p, members)
    return canonicalize(out) if canonical else out


def pred(z: CNState, choice: NatureChoice, theta, canonical: bool = True) -> CNState:
    """Regress ``z`` through a nature's choice under θ (the mirror of ``succ``)."""
    eff_p = apply_substitution(choice.eff.P, theta)
    if not eff_p.issubmultiset(z.P):
        raise NotApplicable(f"{choice.name}: effect {eff_p} not contained in {z.P}")
    pre_p = apply_substitution(choice.pre.P, theta)
    new_p = (z.P - eff_p) + pre_p
    shared = z.p_vars()
    eff_n = _instantiate_members(choice.eff.N, theta)
    pre_n = _instantiate_members(choice.pre.N, theta)
    kept = [n for n in z.N if not any(is_variant(n, m, shared) for m in eff_n)]
    members = _drop_dangling(kept + pre_n, shared, new_p)
    out = CNState(new_p, members)
    return canonicalize(out) if canonical else out


def specialize_by_effect(z: CNState, choice: NatureChoice, mgu: dict, unmatched) -> CNState:
    """Strengthen ``z`` with the effect fluents it lacks, so the choice is backward applicable."""
    extra = FluentTerm(unmatched)
    P = apply_substitution(z.P, mgu) + apply_substitution(extra, mgu)
    N = [apply_substitution(n, mgu) for n in z.N] + _instantiate_members(choice.eff.N, mgu)
    return CNState(P, N)


def regress(z: CNState, choice: NatureChoice, relevant_only: bool = True) -> list[CNState]:
    """Positive-part regression of ``z`` through ``choice``.

    Each way of producing some of z's positive fluents with the choice's
    positive effect (unifying them, both sides' variables free) yields the
    state ``pred(z ∧ eff)``. Negated members are dropped, so the result
    over-approximates the ground predecessors: every ground state from which
    the choice reaches an instance of ``z``'s positive part while adding at
    least one of its fluents lies in one of the returned states.
    """
    action_vars = choice.variables()
    clash = z.variables() & action_vars
    if clash:
        z = CNState(apply_substitution(z.P, {v: f"_R{v}" for v in clash}))
    zp = list(z.P)
    eff = list(choice.eff.P)
    out: dict[CNState, None] = {}

    def rec(i: int, used: frozenset, binding: dict, matched: bool):
        if i == len(zp):
            if relevant_only and not matched:
                return
            mgu = resolve(binding)
            unmatched = [eff[j] for j in range(len(eff)) if j not in used]
            zs = specialize_by_effect(CNState(z.P), choice, mgu, unmatched)
            theta = {v: mgu.get(v, v) for v in action_vars}
            r = pred(zs, choice, theta, canonical=False)
            out.setdefault(canonicalize(CNState(r.P)), None)
            return
        rec(i + 1, used, binding, matched)
        for j, g in enumerate(eff):
            if j in used:
                continue
            b = unify_fluents([(zp[i], g)], binding)
            if b is not None:
                rec(i + 1, used | {j}, b, True)

    rec(0, frozenset(), {}, False)
    return list(out)


def ground_apply(d: FluentTerm, choice: NatureChoice, theta) -> GroundState:
    """Apply a fully instantiated choice to a ground state."""
    pre_p = apply_substitution(choice.pre.P, theta)
    eff_p = apply_substitution(choice.eff.P, theta)
    if not (pre_p.is_ground() and eff_p.is_ground()):
        raise NotApplicable(f"{choice.name}: substitution {theta} does not ground the choice")
    if not pre_p.issubmultiset(d):
        raise NotApplicable(f"{choice.name}: precondition {pre_p} does not hold")
    for n in _instantiate_members(choice.pre.N, theta):
        if next(iter_matches(n, d), None) is not None:
            raise NotApplicable(f"{choice.name}: negated precondition {n} is violated")
    return GroundState(((d - pre_p) + eff_p).fluents)
