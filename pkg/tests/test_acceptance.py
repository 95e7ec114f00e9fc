"""Acceptance checks; each test prints one PASS/FAIL line (collected again in the terminal summary)."""
import random
import time

import pytest

from fomdp.actions import NotApplicable, forward_applicable, ground_apply, succ
from fomdp.domain_io import generate_colored_bw, parse_cnstate, parse_fluent_term
from fomdp.folao import abstract_initial_states, exhaustive_fovia, folao, make_heuristic
from fomdp.oracle import (
    brute_force_member,
    cross_validate,
    enumerate_reachable,
    policy_evaluation,
    value_iteration,
)
from fomdp.simulate import simulate
from fomdp.terms import canonicalize, ground_membership
from helpers import (
    all_set_states,
    oracle_policy_entries,
    policy_reachable,
    random_action,
    random_cnstate,
    sample_set_states,
    witnesses,
)

TOL = 1e-3


def test_criterion_1_worked_example(pickup_domain, verdict):
    t0 = time.perf_counter()
    a = pickup_domain.action("pickup")
    z = parse_cnstate("on(b,table) & on(X1,b) & e ; not on(X2,X1)")
    out = succ(z, a.choices[0], {"X": "X1", "Y": "b"})
    want = canonicalize(parse_cnstate("on(b,table) & holding(X1) ; not on(X1,b)"))
    dt = time.perf_counter() - t0
    ok = out == want and dt < 1
    verdict(1, ok, f"succ gives {out} (expected {want}) in {dt:.3f}s")
    assert ok


def test_criterion_2_interpretation(verdict):
    t0 = time.perf_counter()
    z = parse_cnstate("on(X,a) & on(a,table) ; not holding(X2) ; not on(Y,X)")
    inside = parse_fluent_term("on(d,a) & on(a,table)")
    outside = parse_fluent_term("on(d,a) & on(a,table) & holding(c)")
    got = (ground_membership(inside, z), ground_membership(outside, z))
    dt = time.perf_counter() - t0
    # the brute-force enumeration must agree with the matcher
    universe = ("a", "c", "d", "table")
    brute = (brute_force_member(inside, z, universe), brute_force_member(outside, z, universe))
    ok = got == brute == (True, False) and dt < 1
    verdict(2, ok, f"memberships {got}, enumeration {brute}, {dt:.3f}s")
    assert ok


@pytest.mark.parametrize("blocks", [2, 3])
def test_criterion_3_oracle_equivalence(blocks, verdict):
    dom, prob = generate_colored_bw(blocks, 2, 0)
    t0 = time.perf_counter()
    res = folao(dom, abstract_initial_states(prob))
    dt = time.perf_counter() - t0
    m = enumerate_reachable(dom, prob.initial_states)
    V = value_iteration(m).V
    on_policy = [m.state_index(d) for d in policy_reachable(res.policy, dom, prob.initial_states)]
    report = cross_validate(res.V, m, TOL, V_ground=V, states=on_policy)
    everywhere = cross_validate(res.V, m, TOL, V_ground=V)
    ok = res.converged and report.passed and dt < 60
    verdict(3, ok, f"B={blocks}: max |V - V*| = {report.max_deviation:.2e} over {report.checked} "
                   f"policy-reachable ground states (tol {TOL}), solve {dt:.1f}s; "
                   f"over all {everywhere.checked} reachable states max deviation "
                   f"{everywhere.max_deviation:.3g} (off-policy values are upper bounds, min signed "
                   f"{everywhere.min_signed:.2e})")
    assert ok


def _case_is_sound(z, choice, theta, states, universe) -> bool:
    z2 = succ(z, choice, theta)
    for d in states:
        for mu in witnesses(d, z, universe):
            g = {v: mu.get(t, t) for v, t in theta.items()}
            try:
                d2 = ground_apply(d, choice, g)
            except NotApplicable:
                return False
            if not brute_force_member(d2, z2, universe):
                return False
    return True


def test_criterion_4_ground_soundness(verdict):
    rng = random.Random(20261017)
    t0 = time.perf_counter()
    cases = violations = 0
    while cases < 1000:
        z = canonicalize(random_cnstate(rng))
        a = random_action(rng)
        thetas = forward_applicable(z, a)
        if not thetas:
            continue
        theta = rng.choice(thetas)
        # every tenth case uses three objects, with sampled states to keep the run short
        universe = ("a", "b", "c") if cases % 10 == 0 else ("a", "b")
        states = sample_set_states(universe, rng, 300) if len(universe) == 3 else all_set_states(universe)
        cases += 1
        if not _case_is_sound(z, a.choices[0], theta, states, universe):
            violations += 1
    dt = time.perf_counter() - t0
    ok = violations == 0 and dt < 300
    verdict(4, ok, f"{cases} random (Z, action, theta) cases, {violations} violations, {dt:.1f}s")
    assert ok


@pytest.mark.parametrize("blocks", [2, 3])
def test_criterion_5_admissibility(blocks, verdict):
    dom, prob = generate_colored_bw(blocks, 2, 0)
    m = enumerate_reachable(dom, prob.initial_states)
    V = value_iteration(m).V
    worst = {}
    for k in (0, 1, 5):
        h, _ = make_heuristic(dom, k, initial_states=prob.initial_states)
        worst[k] = cross_validate(h, m, V_ground=V).min_signed
    ok = all(w >= -1e-9 for w in worst.values())
    verdict(5, ok, f"B={blocks}: min (h - V*) per k = " + ", ".join(f"k={k}: {w:.3g}" for k, w in worst.items()))
    assert ok


def test_criterion_6_pruning(verdict):
    rows = []
    for seed in range(10):
        dom, prob = generate_colored_bw(4, 2, seed)
        S0 = abstract_initial_states(prob)
        g = folao(dom, S0).stats["expanded_states"]
        full = exhaustive_fovia(dom, S0).stats["reachable_states"]
        rows.append((seed, g, full))
    ok = all(g < full for _, g, full in rows)
    verdict(6, ok, "B=4 |G| vs exhaustive reachable: " + ", ".join(f"s{s}:{g}/{f}" for s, g, f in rows))
    assert ok


def test_criterion_7_simulation(bw3, verdict):
    dom, prob = bw3
    m = enumerate_reachable(dom, prob.initial_states)
    sol = value_iteration(m)
    exact = policy_evaluation(m, sol.policy)[m.initial[0]]
    policy = oracle_policy_entries(m, sol.policy)
    big = simulate(policy, prob, dom, runs=1000, seed=0)
    small = simulate(policy, prob, dom, runs=30, seed=0)
    rel = abs(big.mean - exact) / abs(exact)
    z = abs(small.mean - exact) / small.stderr if small.stderr > 0 else (0.0 if small.mean == exact else float("inf"))
    ok = rel <= 0.02 and z <= 3
    verdict(7, ok, f"exact {exact:.3f}; 1000 runs mean {big.mean:.3f} ({rel:.2%} off); "
                   f"30 runs mean {small.mean:.3f} +- {small.stderr:.3f} ({z:.2f} standard errors)")
    assert ok


def test_criterion_8_recorded_only(verdict):
    """Desk-scale stand-ins for the unreproducible timing table: abstract-state counts per instance."""
    rows = []
    for blocks, colors in [(2, 2), (3, 2), (3, 3), (4, 2), (4, 3), (4, 4)]:
        dom, prob = generate_colored_bw(blocks, colors, 0)
        res = folao(dom, abstract_initial_states(prob))
        s = res.stats
        rows.append(f"B={blocks} C={colors}: heuristic NAS={s['abstract_states']} |G|={s['expanded_states']} "
                    f"|E|={s['envelope_states']} iters={s['outer_iterations']} {s['wall_time']:.1f}s")
    verdict(8, "RECORDED", "not asserted; " + "; ".join(rows))
