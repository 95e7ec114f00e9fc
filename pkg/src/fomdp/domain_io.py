"""Line-oriented domain (``.fcd``) and problem (``.fcp``) files.

Domain file::

    domain blocks
    gamma: 1
    fluents: on/2, holding/1, e/0
    action pickup(X, Y):
      pre: on(X,Y) & e ; not on(W,X)
      cost: -3
      choice pickupS prob 0.75:
        eff: holding(X) ; not on(X,Y)
      choice pickupF prob 0.25:
        eff: noop
    reward: on(X,a) -> 500 absorbing
    default: 0

Problem file::

    problem p1
    domain blocks
    horizon: 1000
    init: on(a,table) & on(b,table) & e

CN-states are written ``P ; not N1 ; not N2`` where ``P`` and each ``Ni`` are
``&``-separated fluents and ``1`` is the empty term. ``#`` starts a comment.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .actions import NatureChoice, RewardModel, RewardRule, StochasticAction
from .terms import CNState, Fluent, FluentTerm, GroundState, Substitution, ground_membership, is_var

__all__ = [
    "ValidationError",
    "ParseError",
    "DomainSpec",
    "ProblemSpec",
    "parse_domain",
    "parse_problem",
    "parse_cnstate",
    "parse_fluent_term",
    "parse_substitution",
    "format_domain",
    "format_problem",
    "load_domain",
    "load_problem",
    "generate_colored_bw",
    "COLOR_PALETTE",
]


class ValidationError(ValueError):
    pass


class ParseError(ValidationError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, col {column}: " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class DomainSpec:
    name: str
    fluents: tuple  # ((symbol, arity), ...)
    actions: tuple
    reward: RewardModel
    gamma: float = 1.0

    def action(self, name: str) -> StochasticAction:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    @property
    def arities(self) -> dict:
        return dict(self.fluents)

    def constants(self) -> set[str]:
        out = set()

        def add(z: CNState):
            for t in [z.P] + list(z.N):
                for f in t:
                    out.update(a for a in f.args if not is_var(a))

        for a in self.actions:
            for c in a.choices:
                add(c.pre)
                add(c.eff)
        for r in self.reward.rules:
            add(r.condition)
        return out

    def validate(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValidationError(f"gamma {self.gamma} outside [0, 1]")
        if self.gamma == 1.0 and not self.reward.has_absorbing:
            raise ValidationError("gamma = 1 requires an absorbing reward rule")
        arity = self.arities
        if len(arity) != len(self.fluents):
            raise ValidationError("duplicate fluent declaration")

        def check(z: CNState, where: str):
            for t in [z.P] + list(z.N):
                for f in t:
                    if f.symbol not in arity:
                        raise ValidationError(f"{where}: undeclared fluent {f.symbol}")
                    if arity[f.symbol] != f.arity:
                        raise ValidationError(
                            f"{where}: arity mismatch for {f.symbol} (declared {arity[f.symbol]}, used {f.arity})")

        names = [a.name for a in self.actions]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate action names")
        for a in self.actions:
            try:
                a.validate()
            except ValueError as exc:
                raise ValidationError(str(exc)) from None
            for c in a.choices:
                check(c.pre, f"action {a.name}")
                check(c.eff, f"choice {c.name}")
        for r in self.reward.rules:
            check(r.condition, "reward rule")


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain: str
    initial_states: tuple
    horizon: int = 1000

    def constants(self) -> set[str]:
        return {a for d in self.initial_states for f in d for a in f.args}


# --- lexical layer ------------------------------------------------------------

_IDENT = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_\-]*")
_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


class _Cursor:
    def __init__(self, text: str, line: int, offset: int):
        self.text = text
        self.pos = 0
        self.line = line
        self.offset = offset

    def error(self, msg: str) -> ParseError:
        return ParseError(msg, self.line, self.offset + self.pos + 1)

    def ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, s: str) -> bool:
        self.ws()
        return self.text.startswith(s, self.pos)

    def expect(self, s: str):
        if not self.peek(s):
            raise self.error(f"expected {s!r}")
        self.pos += len(s)

    def ident(self) -> str:
        self.ws()
        m = _IDENT.match(self.text, self.pos)
        if not m:
            raise self.error("expected identifier")
        self.pos = m.end()
        return m.group(0)

    def at_end(self) -> bool:
        self.ws()
        return self.pos >= len(self.text)


def _fluent(cur: _Cursor) -> Fluent:
    start = cur.pos
    sym = cur.ident()
    if is_var(sym):
        cur.pos = start
        cur.ws()
        raise cur.error(f"fluent symbol must be lowercase, got {sym!r}")
    args = []
    if cur.peek("("):
        cur.expect("(")
        if not cur.peek(")"):
            args.append(cur.ident())
            while cur.peek(","):
                cur.expect(",")
                args.append(cur.ident())
        cur.expect(")")
    return Fluent(sym, tuple(args))


def _fluent_term(cur: _Cursor) -> FluentTerm:
    cur.ws()
    if cur.text.startswith("1", cur.pos) and not _IDENT.match(cur.text, cur.pos + 1):
        cur.pos += 1
        return FluentTerm()
    out = [_fluent(cur)]
    while cur.peek("&"):
        cur.expect("&")
        out.append(_fluent(cur))
    return FluentTerm(out)


def _cnstate(cur: _Cursor) -> CNState:
    P = _fluent_term(cur)
    members = []
    while cur.peek(";"):
        cur.expect(";")
        cur.ws()
        if cur.ident() != "not":
            raise cur.error("expected 'not'")
        n = _fluent_term(cur)
        if not n:
            raise cur.error("negated term must not be 1")
        members.append(n)
    return CNState(P, members)


def _strip(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def parse_cnstate(text: str, line: int = 0, col: int = 0) -> CNState:
    cur = _Cursor(text, line, col)
    z = _cnstate(cur)
    if not cur.at_end():
        raise cur.error("unexpected trailing input")
    return z


def parse_fluent_term(text: str) -> FluentTerm:
    cur = _Cursor(text, 0, 0)
    t = _fluent_term(cur)
    if not cur.at_end():
        raise cur.error("unexpected trailing input")
    return t


def parse_substitution(text: str) -> Substitution:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise ParseError(f"bad substitution {text!r}")
    body = text[1:-1].strip()
    if not body:
        return Substitution()
    pairs = []
    for item in body.split(","):
        k, _, v = item.partition("->")
        pairs.append((k.strip(), v.strip()))
    return Substitution(pairs)


# --- domain -----------------------------------------------------------------

_HEAD = re.compile(r"^\s*(domain|problem|gamma|fluents|action|pre|cost|choice|eff|reward|default|horizon|init)\b")


def _number(text: str, line: int, col: int) -> float:
    """``col`` is the 0-based offset of ``text`` within its line."""
    if not re.fullmatch(_NUMBER, text.strip()):
        lead = len(text) - len(text.lstrip())
        raise ParseError(f"expected number, got {text.strip()!r}", line, col + lead + 1)
    return float(text)


def _after_colon(raw: str, keyword: str, lineno: int) -> tuple[str, int]:
    i = raw.find(keyword) + len(keyword)
    j = raw.find(":", i)
    if j < 0:
        raise ParseError(f"expected ':' after {keyword}", lineno, i + 1)
    return raw[j + 1:], j + 1


def parse_domain(text: str) -> DomainSpec:
    """Parse and validate a domain description."""
    name = None
    gamma = 1.0
    fluents: list = []
    actions: list = []
    rules: list = []
    default = 0.0
    cur_action: Optional[dict] = None
    cur_choice: Optional[dict] = None

    def close_action():
        nonlocal cur_action
        if cur_action is None:
            return
        pre = cur_action["pre"]
        if pre is None:
            raise ParseError(f"action {cur_action['name']} has no pre:", cur_action["line"], 1)
        choices = []
        for ch in cur_action["choices"]:
            if ch["eff"] is None:
                raise ParseError(f"choice {ch['name']} has no eff:", ch["line"], 1)
            eff = pre if ch["eff"] == "noop" else ch["eff"]
            choices.append(NatureChoice(ch["name"], cur_action["params"], pre, eff, ch["prob"]))
        if not choices:
            raise ParseError(f"action {cur_action['name']} has no choices", cur_action["line"], 1)
        total = sum(c.prob for c in choices)
        if abs(total - 1.0) > 1e-9:
            raise ParseError(f"action {cur_action['name']}: probabilities sum to {total:g}", cur_action["line"], 1)
        actions.append(StochasticAction(cur_action["name"], cur_action["params"], tuple(choices),
                                        cur_action["cost"]))
        cur_action = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        raw = _strip(raw)
        if not raw.strip():
            continue
        m = _HEAD.match(raw)
        if not m:
            col = len(raw) - len(raw.lstrip()) + 1
            raise ParseError(f"unknown statement {raw.strip().split()[0]!r}", lineno, col)
        kw = m.group(1)
        if kw == "domain":
            name = raw[m.end():].strip()
            if not _IDENT.fullmatch(name or ""):
                raise ParseError("expected domain name", lineno, m.end() + 1)
        elif kw == "gamma":
            body, col = _after_colon(raw, kw, lineno)
            gamma = _number(body, lineno, col)
        elif kw == "fluents":
            body, col = _after_colon(raw, kw, lineno)
            for item in body.split(","):
                item = item.strip()
                fm = re.fullmatch(r"([a-z][A-Za-z0-9_\-]*)\s*/\s*(\d+)", item)
                if not fm:
                    raise ParseError(f"bad fluent declaration {item!r}", lineno, col + 1)
                fluents.append((fm.group(1), int(fm.group(2))))
        elif kw == "action":
            close_action()
            cur_choice = None
            am = re.match(r"\s*action\s+([a-z][A-Za-z0-9_\-]*)\s*(?:\(([^)]*)\))?\s*:\s*$", raw)
            if not am:
                raise ParseError("expected 'action name(Params):'", lineno, 1)
            params = tuple(p.strip() for p in (am.group(2) or "").split(",") if p.strip())
            for p in params:
                if not is_var(p):
                    raise ParseError(f"action parameter {p!r} must be a variable", lineno, 1)
            cur_action = {"name": am.group(1), "params": params, "pre": None, "cost": 0.0,
                          "choices": [], "line": lineno}
        elif kw in ("pre", "cost", "choice", "eff"):
            if cur_action is None:
                raise ParseError(f"{kw}: outside an action", lineno, 1)
            body, col = _after_colon(raw, kw, lineno) if kw != "choice" else ("", 0)
            if kw == "pre":
                cur_action["pre"] = parse_cnstate(body, lineno, col)
            elif kw == "cost":
                cur_action["cost"] = _number(body, lineno, col)
            elif kw == "choice":
                cm = re.match(rf"\s*choice\s+([A-Za-z][A-Za-z0-9_\-]*)\s+prob\s+({_NUMBER})\s*:\s*(.*)$", raw)
                if not cm:
                    raise ParseError("expected 'choice name prob p:'", lineno, 1)
                cur_choice = {"name": cm.group(1), "prob": float(cm.group(2)), "eff": None, "line": lineno}
                cur_action["choices"].append(cur_choice)
                rest = cm.group(3).strip()
                if rest:
                    em = re.match(r"eff\s*:(.*)$", rest)
                    if not em:
                        raise ParseError("expected 'eff:'", lineno, cm.start(3) + 1)
                    cur_choice["eff"] = _eff(em.group(1), lineno, cm.start(3) + em.start(1))
            else:
                if cur_choice is None:
                    raise ParseError("eff: outside a choice", lineno, 1)
                cur_choice["eff"] = _eff(body, lineno, col)
        elif kw == "reward":
            close_action()
            body, col = _after_colon(raw, kw, lineno)
            left, arrow, right = body.rpartition("->")
            if not arrow:
                raise ParseError("expected '->' in reward rule", lineno, col + 1)
            rcol = col + len(left) + len(arrow)
            parts = right.split()
            absorbing = len(parts) == 2 and parts[1] == "absorbing"
            if not parts or len(parts) > 2 or (len(parts) == 2 and not absorbing):
                lead = len(right) - len(right.lstrip())
                raise ParseError("expected '-> <value> [absorbing]'", lineno, rcol + lead + 1)
            value = _number(parts[0], lineno, rcol + len(right) - len(right.lstrip()))
            rules.append(RewardRule(parse_cnstate(left, lineno, col), value, absorbing))
        elif kw == "default":
            close_action()
            body, col = _after_colon(raw, kw, lineno)
            default = _number(body, lineno, col)
        else:
            raise ParseError(f"{kw} is not allowed in a domain file", lineno, 1)
    close_action()
    if name is None:
        raise ParseError("missing 'domain <name>' line", 1, 1)
    spec = DomainSpec(name, tuple(fluents), tuple(actions), RewardModel(tuple(rules), default), gamma)
    spec.validate()
    return spec


def _eff(body: str, lineno: int, col: int = 0):
    if body.strip() == "noop":
        return "noop"
    return parse_cnstate(body, lineno, col)


def _fmt_num(x: float) -> str:
    return repr(float(x)) if x != int(x) else str(int(x))


def format_domain(spec: DomainSpec) -> str:
    lines = [f"domain {spec.name}", f"gamma: {_fmt_num(spec.gamma)}",
             "fluents: " + ", ".join(f"{s}/{a}" for s, a in spec.fluents)]
    for a in spec.actions:
        lines.append(f"action {a.name}({', '.join(a.params)}):")
        lines.append(f"  pre: {a.pre}")
        lines.append(f"  cost: {_fmt_num(a.cost)}")
        for c in a.choices:
            lines.append(f"  choice {c.name} prob {c.prob!r}:")
            lines.append(f"    eff: {'noop' if c.is_noop else c.eff}")
    for r in spec.reward.rules:
        lines.append(f"reward: {r.condition} -> {_fmt_num(r.value)}" + (" absorbing" if r.absorbing else ""))
    lines.append(f"default: {_fmt_num(spec.reward.default)}")
    return "\n".join(lines) + "\n"


# --- problem ----------------------------------------------------------------

def parse_problem(text: str, dom: DomainSpec) -> ProblemSpec:
    """Parse a problem and check it against ``dom``."""
    name = None
    domain_name = None
    horizon = 1000
    inits = []
    arity = dom.arities
    for lineno, raw in enumerate(text.splitlines(), 1):
        raw = _strip(raw)
        if not raw.strip():
            continue
        m = _HEAD.match(raw)
        if not m or m.group(1) not in ("problem", "domain", "horizon", "init"):
            raise ParseError(f"unknown statement {raw.strip().split()[0]!r}", lineno, 1)
        kw = m.group(1)
        if kw == "problem":
            name = raw[m.end():].strip()
        elif kw == "domain":
            domain_name = raw[m.end():].strip()
        elif kw == "horizon":
            body, col = _after_colon(raw, kw, lineno)
            h = _number(body, lineno, col)
            if h != int(h) or h < 1:
                raise ParseError("horizon must be a positive integer", lineno, col)
            horizon = int(h)
        else:
            body, col = _after_colon(raw, kw, lineno)
            cur = _Cursor(body, lineno, col)
            term = _fluent_term(cur)
            if not cur.at_end():
                raise cur.error("unexpected trailing input")
            if not term.is_ground():
                raise ParseError("initial states must be ground", lineno, col + 1)
            for f in term:
                if f.symbol not in arity:
                    raise ParseError(f"undeclared fluent {f.symbol}", lineno, col + 1)
                if arity[f.symbol] != f.arity:
                    raise ParseError(f"arity mismatch for {f.symbol}", lineno, col + 1)
            inits.append(GroundState(term.fluents))
    if not name:
        raise ParseError("missing 'problem <name>' line", 1, 1)
    if domain_name != dom.name:
        raise ValidationError(f"problem refers to unknown domain {domain_name!r} (loaded {dom.name!r})")
    if not inits:
        raise ValidationError("problem has no initial state")
    return ProblemSpec(name, domain_name, tuple(inits), horizon)


def format_problem(p: ProblemSpec) -> str:
    lines = [f"problem {p.name}", f"domain {p.domain}", f"horizon: {p.horizon}"]
    lines += [f"init: {d}" for d in p.initial_states]
    return "\n".join(lines) + "\n"


def load_domain(path) -> DomainSpec:
    return parse_domain(Path(path).read_text(encoding="utf-8"))


def load_problem(path, dom: DomainSpec) -> ProblemSpec:
    return parse_problem(Path(path).read_text(encoding="utf-8"), dom)


# --- colored Blocksworld ----------------------------------------------------

COLOR_PALETTE = ("red", "green", "blue", "yellow", "white", "black", "orange", "purple")


def _color_name(i: int) -> str:
    return COLOR_PALETTE[i] if i < len(COLOR_PALETTE) else f"color{i}"


def _bw_actions(success: float, cost: float) -> str:
    fail = 1.0 - success
    return f"""\
action pickup(X, Y):
  pre: on(X,Y) & clear(X) & block(Y) & e
  cost: {_fmt_num(cost)}
  choice pickupS prob {success!r}:
    eff: holding(X) & clear(Y) & block(Y)
  choice pickupF prob {fail!r}:
    eff: noop
action pickupt(X):
  pre: on(X,table) & clear(X) & e
  cost: {_fmt_num(cost)}
  choice pickuptS prob {success!r}:
    eff: holding(X)
  choice pickuptF prob {fail!r}:
    eff: noop
action putdown(X, Y):
  pre: holding(X) & clear(Y) & block(Y)
  cost: {_fmt_num(cost)}
  choice putdownS prob {success!r}:
    eff: on(X,Y) & clear(X) & block(Y) & e
  choice putdownF prob {fail!r}:
    eff: noop
action putdownt(X):
  pre: holding(X)
  cost: {_fmt_num(cost)}
  choice putdowntS prob {success!r}:
    eff: on(X,table) & clear(X) & e
  choice putdowntF prob {fail!r}:
    eff: noop
"""


_MAX_INIT_DRAWS = 1000


def _random_towers(names: list[str], colour_of: dict, rng: random.Random) -> GroundState:
    order = names[:]
    rng.shuffle(order)
    towers: list[list[str]] = []
    for b in order:
        if towers and rng.random() < 0.5:
            rng.choice(towers).append(b)
        else:
            towers.append([b])
    init = ["e"]
    for b in names:
        init += [f"block({b})", f"{colour_of[b]}({b})"]
    for t in towers:
        init.append(f"on({t[0]},table)")
        for below, above in zip(t, t[1:]):
            init.append(f"on({above},{below})")
        init.append(f"clear({t[-1]})")
    return GroundState(parse_fluent_term(" & ".join(init)).fluents)


def generate_colored_bw(blocks: int, colors: int, seed: int = 0, *, goal_reward: float = 500.0,
                        cost: float = -3.0, success: float = 0.75,
                        goal_height: Optional[int] = None) -> tuple[DomainSpec, ProblemSpec]:
    """Random colored Blocksworld instance.

    Blocks ``b1..bB`` get colours round-robin, shuffled by ``seed``. The goal
    is a single tower described by colours only (``goal_height`` blocks,
    default all of them), so any blocks of matching colours satisfy it. The
    initial configuration is a seeded random set of towers, redrawn until it
    does not already satisfy the goal.
    """
    if not 1 <= colors <= blocks:
        raise ValidationError(f"need 1 <= colors <= blocks, got colors={colors}, blocks={blocks}")
    height = blocks if goal_height is None else goal_height
    if not 1 <= height <= blocks:
        raise ValidationError("goal_height must lie in [1, blocks]")
    rng = random.Random(seed)
    names = [f"b{i + 1}" for i in range(blocks)]
    palette = [_color_name(i) for i in range(colors)]
    assigned = [palette[i % colors] for i in range(blocks)]
    rng.shuffle(assigned)
    colour_of = dict(zip(names, assigned))

    tower = names[:]
    rng.shuffle(tower)
    tower = tower[:height]  # bottom to top
    goal = [f"on(X1,table)"]
    for i in range(1, height):
        goal.append(f"on(X{i + 1},X{i})")
    goal += [f"{colour_of[b]}(X{i + 1})" for i, b in enumerate(tower)]
    goal_state = parse_cnstate(" & ".join(goal))

    for _ in range(_MAX_INIT_DRAWS):
        init = _random_towers(names, colour_of, rng)
        if not ground_membership(init, goal_state):
            break
    else:
        raise ValidationError("could not draw an initial state that misses the goal")

    dom_name = f"colored-bw-{blocks}-{colors}"
    fluent_decl = ["on/2", "clear/1", "block/1", "holding/1", "e/0"] + [f"{c}/1" for c in palette]
    dom_text = (f"# colored Blocksworld, {blocks} blocks, {colors} colours, seed {seed}\n"
                f"domain {dom_name}\ngamma: 1\nfluents: {', '.join(fluent_decl)}\n"
                + _bw_actions(success, cost)
                + f"reward: {' & '.join(goal)} -> {_fmt_num(goal_reward)} absorbing\ndefault: 0\n")
    dom = parse_domain(dom_text)
    init_term = init
    prob = ProblemSpec(f"{dom_name}-s{seed}", dom_name, (init_term,), 1000)
    return dom, prob
