"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

from pathlib import Path

from .domain_io import DomainSpec, ProblemSpec, ValidationError, load_domain, load_problem, parse_fluent_term
from .terms import CNState, FluentTerm, GroundState, canonicalize


def check_domain(dom) -> DomainSpec:
    """Accept a DomainSpec or a path to a ``.fcd`` file; always validated."""
    if isinstance(dom, (str, Path)):
        dom = load_domain(dom)
    if not isinstance(dom, DomainSpec):
        raise TypeError(f"expected a DomainSpec or a path, got {type(dom).__name__}")
    dom.validate()
    return dom


def check_problem(problem, dom: DomainSpec) -> ProblemSpec:
    if isinstance(problem, (str, Path)):
        problem = load_problem(problem, dom)
    if not isinstance(problem, ProblemSpec):
        raise TypeError(f"expected a ProblemSpec or a path, got {type(problem).__name__}")
    if problem.domain != dom.name:
        raise ValidationError(f"problem is for domain {problem.domain!r}, not {dom.name!r}")
    if not problem.initial_states:
        raise ValidationError("problem has no initial state")
    arity = dom.arities
    for d in problem.initial_states:
        for f in d:
            if arity.get(f.symbol) != f.arity:
                raise ValidationError(f"initial state uses undeclared fluent {f.symbol}/{f.arity}")
    return problem


def check_ground_states(states) -> list[GroundState]:
    """Normalize one state or a list of states (GroundState, FluentTerm or text) to ground states."""
    if isinstance(states, (str, FluentTerm)):
        states = [states]
    out = []
    for s in states:
        if isinstance(s, str):
            s = parse_fluent_term(s)
        if isinstance(s, CNState):
            if s.N or not s.P.is_ground():
                raise ValidationError(f"not a ground state: {s}")
            s = s.P
        if not isinstance(s, FluentTerm) or not s.is_ground():
            raise ValidationError(f"not a ground state: {s}")
        out.append(s if isinstance(s, GroundState) else GroundState(s.fluents))
    return out


def check_abstract_states(states) -> list[CNState]:
    if isinstance(states, CNState):
        states = [states]
    out = []
    for s in states:
        if not isinstance(s, CNState):
            raise ValidationError(f"expected a CN-state, got {type(s).__name__}")
        out.append(canonicalize(s))
    return out
