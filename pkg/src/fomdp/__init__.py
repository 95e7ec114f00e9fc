"""Planning in first-order MDPs over CN-state abstractions.

Ground states are never enumerated by the solvers: FOVIA backs up values of
abstract states directly, and FOLAO* restricts those backups to the states
reachable from the initial states under the current greedy policy.
"""
from .actions import NatureChoice, RewardModel, RewardRule, StochasticAction, ground_apply, pred, regress, succ
from .domain_io import (
    DomainSpec,
    ParseError,
    ProblemSpec,
    ValidationError,
    generate_colored_bw,
    load_domain,
    load_problem,
    parse_cnstate,
    parse_domain,
    parse_problem,
)
from .estimators import ExhaustiveFOVIA, FOLAOStar, GroundValueIteration
from .folao import SolveConfig, exhaustive_fovia, folao, make_heuristic
from .fovia import ValueFunction, backup, fovia_loop, q_value
from .simulate import simulate
from .terms import CNState, Fluent, FluentTerm, GroundState, Substitution, canonicalize, ground_membership, subsumes

__version__ = "0.1.0"
