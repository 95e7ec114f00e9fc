"""Shared test utilities: random lifted objects over a tiny signature and brute-force oracles."""
from __future__ import annotations

import itertools
import random

from fomdp.actions import NatureChoice, StochasticAction
from fomdp.terms import CNState, Fluent, FluentTerm, GroundState, unify_fluents

SIGNATURE = (("p", 1), ("q", 2), ("r", 0))


def ground_atoms(objects, signature=SIGNATURE):
    out = []
    for sym, n in signature:
        for args in itertools.product(objects, repeat=n):
            out.append(Fluent(sym, tuple(args)))
    return out


def all_set_states(objects, signature=SIGNATURE):
    """Every set of ground atoms over ``objects`` (as ground states)."""
    atoms = ground_atoms(objects, signature)
    for mask in range(1 << len(atoms)):
        yield GroundState(a for i, a in enumerate(atoms) if mask >> i & 1)


def sample_set_states(objects, rng: random.Random, k: int, signature=SIGNATURE):
    atoms = ground_atoms(objects, signature)
    for _ in range(k):
        yield GroundState(a for a in atoms if rng.random() < 0.4)


def random_fluent(rng: random.Random, terms, signature=SIGNATURE) -> Fluent:
    sym, n = rng.choice(signature)
    return Fluent(sym, tuple(rng.choice(terms) for _ in range(n)))


def random_cnstate(rng: random.Random, pvars=("X1", "X2"), consts=("a", "b"), max_p=3, max_n=2) -> CNState:
    P = [random_fluent(rng, list(pvars) + list(consts)) for _ in range(rng.randint(1, max_p))]
    present = sorted({t for f in P for t in f.args if t in pvars})
    N = []
    for i in range(rng.randint(0, max_n)):
        terms = present + list(consts) + [f"W{i}"]
        N.append(FluentTerm(random_fluent(rng, terms) for _ in range(rng.randint(1, 2))))
    return CNState(FluentTerm(P), N)


def random_action(rng: random.Random, consts=("a",)) -> StochasticAction:
    """A one-choice action whose negated effects are justified by removed preconditions."""
    pre_terms = ["X", "Y"] + list(consts)
    pre_p = [random_fluent(rng, pre_terms) for _ in range(rng.randint(1, 2))]
    pvars = sorted({t for f in pre_p for t in f.args if t in ("X", "Y")})
    pre_n = []
    if rng.random() < 0.5:
        pre_n.append(FluentTerm([random_fluent(rng, pvars + list(consts) + ["V"])]))
    eff_p = [random_fluent(rng, pvars + list(consts)) for _ in range(rng.randint(0, 2))]
    removed = [f for f in set(pre_p) if f not in eff_p and pre_p.count(f) == 1]
    eff_n = [FluentTerm([f]) for f in removed if rng.random() < 0.5
             and not any(unify_fluents([(f, g)]) is not None for g in eff_p)]
    pre = CNState(FluentTerm(pre_p), pre_n)
    eff = CNState(FluentTerm(eff_p), eff_n)
    choice = NatureChoice("c", tuple(pvars), pre, eff, 1.0)
    return StochasticAction("act", tuple(pvars), (choice,), -1.0)


def witnesses(d, z: CNState, universe):
    """All groundings μ of z's positive variables with d ∈ (z μ)^I, by enumeration."""
    from fomdp.oracle import brute_force_member
    from fomdp.terms import apply_substitution

    pv = sorted(z.p_vars())
    for vals in itertools.product(universe, repeat=len(pv)):
        mu = dict(zip(pv, vals))
        zi = CNState(apply_substitution(z.P, mu), [apply_substitution(n, mu) for n in z.N])
        if brute_force_member(d, zi, tuple(universe)):
            yield mu


def policy_reachable(policy, dom, initial_states):
    """Ground states reachable from ``initial_states`` when acting by the abstract ``policy``."""
    from fomdp.actions import ground_apply
    from fomdp.simulate import PolicyTable

    table = policy if isinstance(policy, PolicyTable) else PolicyTable(policy)
    seen = dict.fromkeys(initial_states)
    queue = list(seen)
    while queue:
        d = queue.pop()
        rule = dom.reward.match_ground(d)
        if rule is not None and rule.absorbing:
            continue
        ga = table.ground_action(d)
        if ga is None:
            continue
        for c in dom.action(ga[0]).choices:
            d2 = ground_apply(d, c, ga[1])
            if d2 not in seen:
                seen[d2] = None
                queue.append(d2)
    return list(seen)


def oracle_policy_entries(m, policy):
    """Ground oracle policy as abstract entries on lifted ground states."""
    from fomdp.fovia import PolicyEntry
    from fomdp.terms import canonicalize

    out = []
    for i, k in enumerate(policy):
        if k is not None:
            o = m.options[i][k]
            out.append(PolicyEntry(canonicalize(CNState(m.states[i])), o.action, o.theta))
    return out
