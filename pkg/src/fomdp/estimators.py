"""scikit-learn style front ends: ``fit(domain, problem)`` then ``predict`` / ``value`` / ``score``."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .folao import SolveConfig, abstract_initial_states, exhaustive_fovia, folao, with_gamma
from .fovia import DEFAULT_EPSILON
from .oracle import enumerate_reachable, value_iteration
from .simulate import DEFAULT_RUNS, PolicyTable, simulate
from .validation import check_domain, check_ground_states, check_problem


class _PlannerMixin:
    """Shared predict/value/score for planners that expose ``policy_`` and ``value_function_``."""

    def predict(self, states):
        """Ground action ``(name, θ)`` per ground state, or None where the policy has no entry."""
        check_is_fitted(self, "policy_")
        table = PolicyTable(self.policy_)
        return [table.ground_action(d) for d in check_ground_states(states)]

    def value(self, states) -> np.ndarray:
        check_is_fitted(self, "value_function_")
        return np.array([self.value_function_.lookup_ground(d) for d in check_ground_states(states)])

    def score(self, problem=None, runs: int = DEFAULT_RUNS, seed: int = 0) -> float:
        """Mean simulated reward of the fitted policy (higher is better)."""
        check_is_fitted(self, "policy_")
        problem = self.problem_ if problem is None else check_problem(problem, self.domain_)
        return simulate(self.policy_, problem, self.domain_, runs=runs, seed=seed).mean


class FOLAOStar(_PlannerMixin, BaseEstimator):
    """Heuristic search over CN-states from the problem's lifted initial states.

    Parameters
    ----------
    epsilon : residual threshold for convergence.
    gamma : discount; None keeps the domain's.
    heuristic_sweeps : regression depth k of the admissible heuristic.
    """

    def __init__(self, epsilon: float = DEFAULT_EPSILON, gamma=None, heuristic_sweeps: int = 5,
                 max_outer_iters: int = 1000, max_fovia_iters: int = 1000):
        self.epsilon = epsilon
        self.gamma = gamma
        self.heuristic_sweeps = heuristic_sweeps
        self.max_outer_iters = max_outer_iters
        self.max_fovia_iters = max_fovia_iters

    def _config(self) -> SolveConfig:
        cfg = SolveConfig(self.epsilon, self.gamma, self.heuristic_sweeps,
                          self.max_outer_iters, self.max_fovia_iters)
        cfg.validate()
        return cfg

    def fit(self, domain, problem):
        cfg = self._config()
        self.domain_ = with_gamma(check_domain(domain), self.gamma)
        self.problem_ = check_problem(problem, self.domain_)
        res = folao(self.domain_, abstract_initial_states(self.problem_), cfg)
        self.policy_ = res.policy
        self.value_function_ = res.V
        self.heuristic_ = res.heuristic
        self.stats_ = res.stats
        self.converged_ = res.converged
        return self


class ExhaustiveFOVIA(_PlannerMixin, BaseEstimator):
    """FOVIA over every abstract state reachable from the lifted initial states."""

    def __init__(self, epsilon: float = DEFAULT_EPSILON, gamma=None, max_fovia_iters: int = 1000):
        self.epsilon = epsilon
        self.gamma = gamma
        self.max_fovia_iters = max_fovia_iters

    def fit(self, domain, problem):
        cfg = SolveConfig(epsilon=self.epsilon, gamma=self.gamma, max_fovia_iters=self.max_fovia_iters)
        cfg.validate()
        self.domain_ = with_gamma(check_domain(domain), self.gamma)
        self.problem_ = check_problem(problem, self.domain_)
        res = exhaustive_fovia(self.domain_, abstract_initial_states(self.problem_), cfg)
        self.policy_ = res.policy
        self.value_function_ = res.V
        self.stats_ = res.stats
        self.converged_ = res.converged
        return self


class GroundValueIteration(BaseEstimator):
    """Value iteration on the enumerated ground MDP (the reference oracle)."""

    def __init__(self, epsilon: float = 1e-10, gamma=None, max_iters: int = 1_000_000):
        self.epsilon = epsilon
        self.gamma = gamma
        self.max_iters = max_iters

    def fit(self, domain, problem):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        self.domain_ = with_gamma(check_domain(domain), self.gamma)
        self.problem_ = check_problem(problem, self.domain_)
        self.mdp_ = enumerate_reachable(self.domain_, self.problem_.initial_states)
        sol = value_iteration(self.mdp_, self.epsilon, self.max_iters)
        self.V_ = sol.V
        self.policy_ = sol.policy
        self.converged_ = sol.converged
        self.n_iter_ = sol.iterations
        return self

    def value(self, states) -> np.ndarray:
        check_is_fitted(self, "V_")
        return np.array([self.V_[self.mdp_.state_index(d)] for d in check_ground_states(states)])

    def predict(self, states):
        check_is_fitted(self, "policy_")
        out = []
        for d in check_ground_states(states):
            k = self.policy_[self.mdp_.state_index(d)]
            o = None if k is None else self.mdp_.options[self.mdp_.state_index(d)][k]
            out.append(None if o is None else (o.action, o.theta))
        return out
