import itertools
from math import comb, factorial

import numpy as np
import pytest

from fomdp.actions import NotApplicable, ground_apply
from fomdp.domain_io import generate_colored_bw, parse_cnstate, parse_domain, parse_fluent_term, parse_problem
from fomdp.fovia import ValueFunction
from fomdp.oracle import (
    bellman_residuals,
    brute_force_member,
    cross_validate,
    enumerate_reachable,
    policy_evaluation,
    reachable_under,
    value_iteration,
)
from fomdp.terms import Substitution


def towers(n: int) -> int:
    """Arrangements of n labelled blocks into unordered stacks (sum of Lah numbers)."""
    if n == 0:
        return 1
    return sum(comb(n - 1, k - 1) * factorial(n) // factorial(k) for k in range(1, n + 1))


def bw_states(n: int) -> int:
    return towers(n) + n * towers(n - 1)


def test_lah_counts():
    assert [towers(n) for n in range(1, 5)] == [1, 3, 13, 73]


@pytest.mark.parametrize("blocks, expected", [(2, 5), (3, 22), (4, 125)])
def test_reachable_counts_match_closed_form(blocks, expected):
    dom, prob = generate_colored_bw(blocks, 2, 0)
    m = enumerate_reachable(dom, prob.initial_states)
    assert len(m) == bw_states(blocks) == expected


def test_fig1_judgements_by_enumeration():
    z = parse_cnstate("on(X,a) & on(a,table) ; not holding(X2) ; not on(Y,X)")
    universe = ("a", "c", "d", "table")
    assert brute_force_member(parse_fluent_term("on(d,a) & on(a,table)"), z, universe)
    assert not brute_force_member(parse_fluent_term("on(d,a) & on(a,table) & holding(c)"), z, universe)


def _check_transitions(dom, m):
    for i, d in enumerate(m.states):
        if m.absorbing[i]:
            continue
        listed = set()
        for o in m.options[i]:
            a = dom.action(o.action)
            listed.add((o.action, o.theta))
            for (name, p, j), c in zip(o.outcomes, a.choices):
                assert name == c.name and p == c.prob
                assert ground_apply(d, c, o.theta) == m.states[j]
        # and the other way round: every ground action ground_apply accepts is listed
        for a in dom.actions:
            names = sorted(a.variables())
            for vals in itertools.product(m.universe, repeat=len(names)):
                theta = dict(zip(names, vals))
                try:
                    ground_apply(d, a.choices[0], theta)
                except NotApplicable:
                    continue
                key = Substitution({v: theta[v] for v in names if v in a.pre.p_vars() or v in a.params})
                assert (a.name, key) in listed


def test_transitions_match_ground_apply_bw(bw3):
    dom, prob = bw3
    _check_transitions(dom, enumerate_reachable(dom, prob.initial_states))


def test_transitions_match_ground_apply_with_negations(pickup_domain):
    prob = parse_problem("problem p\ndomain blocks\ninit: on(a,table) & on(b,a) & on(c,table) & e\n",
                         pickup_domain)
    m = enumerate_reachable(pickup_domain, prob.initial_states)
    _check_transitions(pickup_domain, m)
    # pickup(a, table) is blocked by b on a
    first = m.options[m.initial[0]]
    assert ("pickup", Substitution({"X": "a", "Y": "table"})) not in {(o.action, o.theta) for o in first}


@pytest.mark.parametrize("blocks", [2, 3])
def test_value_iteration_satisfies_bellman(blocks):
    dom, prob = generate_colored_bw(blocks, 2, 0)
    m = enumerate_reachable(dom, prob.initial_states)
    sol = value_iteration(m, epsilon=1e-10)
    assert sol.converged
    assert bellman_residuals(m, sol.V).max() <= 1e-8
    exact = policy_evaluation(m, sol.policy)
    assert np.allclose(exact, sol.V, atol=1e-6)


STEP = """\
domain step
gamma: 1
fluents: s/0, g/0
action go:
  pre: s
  cost: -3
  choice ok prob 1: eff: g
reward: g -> 500 absorbing
default: 0
"""

SLIP = STEP.replace("choice ok prob 1: eff: g", "choice ok prob 0.75: eff: g\n  choice no prob 0.25: eff: noop")


def test_one_step_deterministic_value():
    dom = parse_domain(STEP)
    prob = parse_problem("problem p\ndomain step\ninit: s\n", dom)
    m = enumerate_reachable(dom, prob.initial_states)
    assert len(m) == 2
    assert value_iteration(m).V[m.initial[0]] == pytest.approx(497)


def test_geometric_retry_value():
    # V = 0.75*500 + 0.25*V - 3  =>  V = 496
    dom = parse_domain(SLIP)
    prob = parse_problem("problem p\ndomain step\ninit: s\n", dom)
    m = enumerate_reachable(dom, prob.initial_states)
    assert value_iteration(m).V[m.initial[0]] == pytest.approx(496, abs=1e-8)
    assert policy_evaluation(m, [0, None])[0] == pytest.approx(496)


def test_iteration_cap_reports_non_convergence():
    dom = parse_domain(SLIP)
    prob = parse_problem("problem p\ndomain step\ninit: s\n", dom)
    sol = value_iteration(enumerate_reachable(dom, prob.initial_states), max_iters=1)
    assert not sol.converged and sol.iterations == 1


def test_state_limit():
    dom, prob = generate_colored_bw(3, 2, 0)
    with pytest.raises(RuntimeError):
        enumerate_reachable(dom, prob.initial_states, max_states=10)


def test_cross_validate_reports_corruption(bw3):
    dom, prob = bw3
    m = enumerate_reachable(dom, prob.initial_states)
    V = value_iteration(m).V
    exact = cross_validate(lambda d: V[m.state_index(d)], m, 1e-3, V_ground=V)
    assert exact.passed and exact.max_deviation == 0
    bad = V.copy()
    bad[3] += 1.0
    report = cross_validate(lambda d: bad[m.state_index(d)], m, 1e-3, V_ground=V)
    assert not report.passed
    assert report.max_deviation == pytest.approx(1.0)
    assert [str(d) for d, _, _ in report.offenders] == [str(m.states[3])]


def test_constant_upper_bound_is_admissible(bw3):
    dom, prob = bw3
    m = enumerate_reachable(dom, prob.initial_states)
    report = cross_validate(ValueFunction(default=500.0), m, V_ground=value_iteration(m).V)
    assert report.min_signed >= -1e-9


def test_reachable_under_policy_is_closed(bw3):
    dom, prob = bw3
    m = enumerate_reachable(dom, prob.initial_states)
    sol = value_iteration(m)
    idx = set(reachable_under(m, sol.policy))
    assert m.initial[0] in idx
    for i in idx:
        k = sol.policy[i]
        if k is not None:
            assert {j for _, _, j in m.options[i][k].outcomes} <= idx
