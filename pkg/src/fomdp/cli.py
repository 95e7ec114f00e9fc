"""Command line: ``fomdp {solve,simulate,oracle-check,gen-bw,inspect}``.

Exit codes: 0 success, 1 invalid input, 2 no convergence, 3 file I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .domain_io import ValidationError, format_domain, format_problem, generate_colored_bw
from .folao import SolveConfig, abstract_initial_states, exhaustive_fovia, folao, with_gamma
from .fovia import DEFAULT_EPSILON, format_policy, format_values, parse_policy, parse_values
from .oracle import cross_validate, enumerate_reachable, option_index, reachable_under, value_iteration
from .simulate import DEFAULT_RUNS, PolicyTable, simulate
from .validation import check_domain, check_problem

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("fomdp")


def _emit(stats: dict, out=None) -> None:
    out = out or sys.stdout
    for k, v in stats.items():
        if isinstance(v, (list, dict)):
            continue
        print(f"{k}={v}", file=out)


def _read(path) -> str:
    return Path(path).read_text()


def _write(path, text: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)


def cmd_solve(args) -> int:
    dom = with_gamma(check_domain(args.domain), args.gamma)
    prob = check_problem(args.problem, dom)
    cfg = SolveConfig(epsilon=args.epsilon, heuristic_sweeps=args.heuristic_sweeps,
                      max_outer_iters=args.max_outer_iters, max_fovia_iters=args.max_fovia_iters)
    cfg.validate()
    S0 = abstract_initial_states(prob)
    res = exhaustive_fovia(dom, S0, cfg) if args.exhaustive else folao(dom, S0, cfg)
    out = Path(args.out_dir)
    stem = prob.name
    _write(out / f"{stem}.values", format_values(res.V.flattened()))
    _write(out / f"{stem}.policy", format_policy(res.policy))
    stats = {k: v for k, v in res.stats.items() if k != "parents"}
    stats["algorithm"] = "fovia-exhaustive" if args.exhaustive else "folao"
    stats["value_states"] = len(res.V.own_states())
    stats["policy_entries"] = len(res.policy)
    stats["initial_value"] = res.V.lookup(S0[0])
    _write(out / f"{stem}.stats.json", json.dumps(stats, indent=2, sort_keys=True, default=str) + "\n")
    _emit(dict(sorted(stats.items())))
    if not res.converged:
        print("error: did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_simulate(args) -> int:
    dom = check_domain(args.domain)
    prob = check_problem(args.problem, dom)
    policy = parse_policy(_read(args.policy))
    summary = simulate(policy, prob, dom, runs=args.runs, cap=args.cap, seed=args.seed)
    _emit(summary.as_dict())
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    dom = check_domain(args.domain)
    prob = check_problem(args.problem, dom)
    V = parse_values(_read(args.values))
    m = enumerate_reachable(dom, prob.initial_states)
    sol = value_iteration(m)
    states = None
    if args.policy:
        table = PolicyTable(parse_policy(_read(args.policy)))
        chosen = []
        for i, d in enumerate(m.states):
            ga = table.ground_action(d)
            chosen.append(None if ga is None else option_index(m, i, *ga))
        states = reachable_under(m, chosen)
    report = cross_validate(V, m, args.tolerance, V_ground=sol.V, states=states)
    print(report)
    print(f"ground_states={len(m)}")
    print(f"passed={report.passed}")
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_gen_bw(args) -> int:
    dom, prob = generate_colored_bw(args.blocks, args.colors, args.seed)
    out = Path(args.out_dir)
    dpath = out / f"bw-{args.blocks}-{args.colors}-s{args.seed}.fcd"
    ppath = out / f"bw-{args.blocks}-{args.colors}-s{args.seed}.fcp"
    _write(dpath, format_domain(dom))
    _write(ppath, format_problem(prob))
    print(f"domain={dpath}")
    print(f"problem={ppath}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    V = parse_values(_read(args.values))
    entries = V.entries()
    for i, (z, v) in enumerate(entries):
        print(f"[{i}] value={v:g}")
        print(f"    P: {z.P}")
        for n in z.sorted_negations():
            print(f"    not: {n}")
    print(f"default value={V.default:g}")
    print(f"entries={len(entries)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fomdp", description="First-order MDP planning with FOLAO* and FOVIA.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a problem and write value/policy files")
    s.add_argument("domain")
    s.add_argument("problem")
    s.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    s.add_argument("--gamma", type=float, default=None)
    s.add_argument("-k", "--heuristic-sweeps", type=int, default=5)
    s.add_argument("--max-outer-iters", type=int, default=1000)
    s.add_argument("--max-fovia-iters", type=int, default=1000)
    s.add_argument("--exhaustive", action="store_true", help="FOVIA on all reachable abstract states")
    s.add_argument("-o", "--out-dir", default=".")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("simulate", help="Monte-Carlo evaluation of a policy file")
    s.add_argument("domain")
    s.add_argument("problem")
    s.add_argument("policy")
    s.add_argument("--runs", type=int, default=DEFAULT_RUNS)
    s.add_argument("--cap", type=int, default=None, help="step cap (default: the problem horizon)")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("oracle-check", help="compare a value file with ground value iteration")
    s.add_argument("domain")
    s.add_argument("problem")
    s.add_argument("values")
    s.add_argument("--policy", help="only check ground states this policy reaches")
    s.add_argument("--tolerance", type=float, default=1e-3)
    s.set_defaults(func=cmd_oracle_check)

    s = sub.add_parser("gen-bw", help="write a random colored Blocksworld domain and problem")
    s.add_argument("--blocks", type=int, required=True)
    s.add_argument("--colors", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--out-dir", default=".")
    s.set_defaults(func=cmd_gen_bw)

    s = sub.add_parser("inspect", help="pretty-print the CN-states of a value file")
    s.add_argument("values")
    s.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
