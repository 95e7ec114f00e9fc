"""Fluents, fluent terms, CN-states and the matching machinery over them.

Terms are plain strings. A name starting with an uppercase letter or an
underscore is a variable; everything else is a constant (Prolog convention).

A fluent term is a multiset of fluents, stored as a sorted tuple so that two
multisets compare equal iff they contain the same fluents with the same
multiplicities. A CN-state pairs a positive fluent term with a set of negated
fluent terms; variables occurring only inside a negated term are local to it.
"""
from __future__ import annotations

import itertools
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping
from functools import lru_cache
from typing import NamedTuple, Optional

__all__ = [
    "is_var",
    "Fluent",
    "FluentTerm",
    "GroundState",
    "CNState",
    "Substitution",
    "compose",
    "apply_substitution",
    "iter_matches",
    "match_into",
    "ground_membership",
    "negation_implied",
    "is_variant",
    "canonicalize",
    "subsumes",
    "unify_fluents",
    "rename_locals_apart",
]

# Upper bound on renamings tried when canonicalizing symmetric variables.
MAX_CANONICAL_PERMUTATIONS = 5040


def is_var(term: str) -> bool:
    c = term[0]
    return c.isupper() or c == "_"


def _term_key(term: str):
    return (1, term) if is_var(term) else (0, term)


class Fluent(NamedTuple):
    symbol: str
    args: tuple = ()

    @property
    def arity(self) -> int:
        return len(self.args)

    def sort_key(self):
        return _fluent_key(self)

    def variables(self) -> Iterator[str]:
        return (t for t in self.args if is_var(t))

    def is_ground(self) -> bool:
        return not any(is_var(t) for t in self.args)

    def __str__(self) -> str:
        if not self.args:
            return self.symbol
        return f"{self.symbol}({','.join(self.args)})"


@lru_cache(maxsize=None)
def _fluent_key(f: Fluent):
    return (f.symbol, len(f.args), tuple(_term_key(t) for t in f.args))


class FluentTerm:
    """A finite multiset of fluents. The empty term is the unit ``1``."""

    __slots__ = ("fluents", "_hash", "_vars", "_symbols")

    def __init__(self, fluents: Iterable[Fluent] = ()):
        fl = tuple(sorted((f if isinstance(f, Fluent) else Fluent(*f) for f in fluents),
                          key=_fluent_key))
        object.__setattr__(self, "fluents", fl)
        object.__setattr__(self, "_hash", hash(fl))
        object.__setattr__(self, "_vars", None)
        object.__setattr__(self, "_symbols", None)

    def __setattr__(self, name, value):
        raise AttributeError("FluentTerm is immutable")

    def __iter__(self) -> Iterator[Fluent]:
        return iter(self.fluents)

    def __len__(self) -> int:
        return len(self.fluents)

    def __bool__(self) -> bool:
        return bool(self.fluents)

    def __eq__(self, other) -> bool:
        return isinstance(other, FluentTerm) and self.fluents == other.fluents

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "FluentTerm") -> bool:
        return self.key() < other.key()

    def key(self):
        return tuple(f.sort_key() for f in self.fluents)

    def variables(self) -> list[str]:
        if self._vars is None:
            seen = {}
            for f in self.fluents:
                for t in f.args:
                    if is_var(t):
                        seen.setdefault(t, None)
            object.__setattr__(self, "_vars", tuple(seen))
        return list(self._vars)

    def symbol_counts(self) -> Counter:
        if self._symbols is None:
            object.__setattr__(self, "_symbols", Counter((f.symbol, len(f.args)) for f in self.fluents))
        return self._symbols

    def is_ground(self) -> bool:
        return all(f.is_ground() for f in self.fluents)

    def counts(self) -> Counter:
        return Counter(self.fluents)

    def issubmultiset(self, other: "FluentTerm") -> bool:
        mine, theirs = self.counts(), other.counts()
        return all(theirs[f] >= n for f, n in mine.items())

    def __add__(self, other: "FluentTerm") -> "FluentTerm":
        return FluentTerm(self.fluents + tuple(other))

    def __sub__(self, other: "FluentTerm") -> "FluentTerm":
        """Multiset difference; raises ValueError if ``other`` is not contained."""
        remaining = self.counts()
        for f in other:
            if remaining[f] == 0:
                raise ValueError(f"{f} not in {self}")
            remaining[f] -= 1
        return FluentTerm(remaining.elements())

    def __str__(self) -> str:
        return " & ".join(str(f) for f in self.fluents) if self.fluents else "1"

    def __repr__(self) -> str:
        return f"FluentTerm({str(self)!r})"


class GroundState(FluentTerm):
    """A variable-free fluent term: an element of the interpretation domain."""

    __slots__ = ()

    def __init__(self, fluents: Iterable[Fluent] = ()):
        super().__init__(fluents)
        for f in self.fluents:
            if not f.is_ground():
                raise ValueError(f"ground state contains variable fluent {f}")

    def __repr__(self) -> str:
        return f"GroundState({str(self)!r})"


class CNState:
    """Abstract state ``(P, N)``: positive part plus negated fluent terms."""

    __slots__ = ("P", "N", "_hash")

    def __init__(self, P: FluentTerm | Iterable[Fluent] = (), N: Iterable = ()):
        if not isinstance(P, FluentTerm) or isinstance(P, GroundState):
            P = FluentTerm(P)
        members = []
        for n in N:
            if not isinstance(n, FluentTerm):
                n = FluentTerm(n)
            if not n:
                raise ValueError("negated fluent term must be nonempty (1 is not allowed)")
            members.append(n)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "N", frozenset(members))
        object.__setattr__(self, "_hash", hash((P, self.N)))

    def __setattr__(self, name, value):
        raise AttributeError("CNState is immutable")

    def __eq__(self, other) -> bool:
        return isinstance(other, CNState) and self.P == other.P and self.N == other.N

    def __hash__(self) -> int:
        return self._hash

    def sorted_negations(self) -> list[FluentTerm]:
        return sorted(self.N, key=FluentTerm.key)

    def p_vars(self) -> set[str]:
        return set(self.P.variables())

    def local_vars(self, member: FluentTerm) -> list[str]:
        pv = self.p_vars()
        return [v for v in member.variables() if v not in pv]

    def variables(self) -> set[str]:
        out = self.p_vars()
        for n in self.N:
            out.update(n.variables())
        return out

    def is_ground_positive(self) -> bool:
        return self.P.is_ground()

    def __str__(self) -> str:
        parts = [str(self.P)] + [f"not {n}" for n in self.sorted_negations()]
        return " ; ".join(parts)

    def __repr__(self) -> str:
        return f"CNState({str(self)!r})"


class Substitution(Mapping):
    """Immutable variable-to-term mapping, applied simultaneously."""

    __slots__ = ("_map", "_items")

    def __init__(self, bindings: Mapping[str, str] | Iterable[tuple[str, str]] = ()):
        m = dict(bindings)
        for v in m:
            if not is_var(v):
                raise ValueError(f"cannot bind constant {v!r}")
        self._map = m
        self._items = tuple(sorted(m.items()))

    def __getitem__(self, key: str) -> str:
        return self._map[key]

    def __iter__(self):
        return iter(k for k, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        return hash(self._items)

    def __eq__(self, other) -> bool:
        if isinstance(other, Substitution):
            return self._items == other._items
        if isinstance(other, Mapping):
            return dict(self._items) == dict(other)
        return NotImplemented

    def __lt__(self, other: "Substitution") -> bool:
        return self.sort_key() < other.sort_key()

    def sort_key(self):
        return tuple((k, _term_key(v)) for k, v in self._items)

    def term(self, t: str) -> str:
        return self._map.get(t, t)

    def restrict(self, names: Iterable[str]) -> "Substitution":
        keep = set(names)
        return Substitution((k, v) for k, v in self._items if k in keep)

    def then(self, other: Mapping[str, str]) -> "Substitution":
        """Composition: apply ``self`` first, then ``other``."""
        out = {k: other.get(v, v) for k, v in self._items}
        for k, v in other.items():
            out.setdefault(k, v)
        return Substitution(out)

    def is_idempotent(self) -> bool:
        return not any(v in self._map for _, v in self._items)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{k}->{v}" for k, v in self._items) + "}"

    def __repr__(self) -> str:
        return f"Substitution({str(self)})"


def compose(f: FluentTerm, g: FluentTerm) -> FluentTerm:
    """Multiset union of two fluent terms (the ``∘`` operator)."""
    return f + g


def _apply_fluent(f: Fluent, m: Mapping[str, str]) -> Fluent:
    return Fluent(f.symbol, tuple(m.get(t, t) for t in f.args))


def apply_substitution(x, theta: Mapping[str, str]):
    """Apply ``theta`` to a fluent, fluent term or CN-state.

    For a CN-state the substitution reaches the negated members too; callers
    must keep bound names disjoint from negation-local variables.
    """
    if not theta:
        return x
    if isinstance(x, Fluent):
        return _apply_fluent(x, theta)
    if isinstance(x, CNState):
        return CNState(apply_substitution(x.P, theta), (apply_substitution(n, theta) for n in x.N))
    if isinstance(x, FluentTerm):
        return FluentTerm(_apply_fluent(f, theta) for f in x)
    raise TypeError(f"cannot apply substitution to {type(x).__name__}")


# --- one-sided matching -----------------------------------------------------

def _match_args(pargs, targs, binding: dict) -> Optional[dict]:
    new = None
    for p, t in zip(pargs, targs):
        if is_var(p):
            cur = binding.get(p) if new is None else new.get(p)
            if cur is None:
                if new is None:
                    new = dict(binding)
                new[p] = t
            elif cur != t:
                return None
        elif p != t:
            return None
    return binding if new is None else new


def iter_matches(pattern: Iterable[Fluent], target: FluentTerm | Iterable[Fluent],
                 binding: Optional[Mapping[str, str]] = None) -> Iterator[dict]:
    """Yield bindings θ with ``(pattern θ)`` a sub-multiset of ``target``.

    Target variables are rigid (treated as constants). Variables pre-bound in
    ``binding`` are respected; binding a variable to itself makes it rigid.
    The same θ may be yielded more than once when the target has repeats.
    """
    pattern = tuple(pattern)
    counts = Counter(target)
    index: dict = {}
    for f in counts:
        index.setdefault((f.symbol, len(f.args)), []).append(f)
    order = sorted(pattern, key=lambda f: (len(index.get((f.symbol, len(f.args)), ())),
                                          -sum(1 for a in f.args if not is_var(a))))
    for f in order:
        if (f.symbol, len(f.args)) not in index:
            return
    start = dict(binding) if binding else {}

    def rec(i: int, b: dict):
        if i == len(order):
            yield b
            return
        pf = order[i]
        for tf in index[(pf.symbol, len(pf.args))]:
            if counts[tf] == 0:
                continue
            nb = _match_args(pf.args, tf.args, b)
            if nb is None:
                continue
            counts[tf] -= 1
            yield from rec(i + 1, nb)
            counts[tf] += 1

    yield from rec(0, start)


def match_into(pattern: FluentTerm, target: FluentTerm) -> list[Substitution]:
    """All θ over the pattern's variables with ``(pattern θ)^M ⊆ target^M``."""
    pvars = pattern.variables()
    found = {Substitution((v, b[v]) for v in pvars) for b in iter_matches(pattern, target)}
    return sorted(found, key=Substitution.sort_key)


def _rigid(names: Iterable[str]) -> dict:
    return {v: v for v in names}


def negation_implied(general: FluentTerm, specific: FluentTerm, shared: Iterable[str]) -> bool:
    """True iff some σ over ``general``'s non-shared variables gives ``general σ ⊆ specific``.

    Every variable of ``specific`` and every shared variable is rigid. Absence
    of any instance of ``general`` then entails absence of ``specific``.
    """
    shared = set(shared)
    start = _rigid(v for v in general.variables() if v in shared)
    return next(iter_matches(general, specific, start), None) is not None


def ground_membership(d: FluentTerm, z: CNState) -> bool:
    """Decide ``d ∈ Z^I`` for a ground multiset ``d``."""
    if not d.is_ground():
        raise ValueError("ground_membership needs a ground state")
    for theta in iter_matches(z.P, d):
        if all(next(iter_matches(apply_substitution(n, theta), d), None) is None for n in z.N):
            return True
    return False


# --- renaming helpers -------------------------------------------------------

_fresh_counter = itertools.count()


def rename_locals_apart(member: FluentTerm, shared: Iterable[str], prefix: str = "_L") -> FluentTerm:
    """Rename variables of ``member`` not in ``shared`` to fresh underscore names."""
    shared = set(shared)
    ren = {v: f"{prefix}{next(_fresh_counter)}" for v in member.variables() if v not in shared}
    return apply_substitution(member, ren)


def _member_canonical(member: FluentTerm, shared: set[str]) -> FluentTerm:
    """Rename a negated member's local variables to ``W1..Wk`` minimally."""
    local = [v for v in member.variables() if v not in shared]
    if not local:
        return member
    best = None
    perms = itertools.permutations(local) if len(local) <= 6 else [tuple(local)]
    for perm in perms:
        cand = apply_substitution(member, {v: f"W{i + 1}" for i, v in enumerate(perm)})
        k = cand.key()
        if best is None or k < best[0]:
            best = (k, cand)
    return best[1]


def is_variant(n1: FluentTerm, n2: FluentTerm, shared: Iterable[str]) -> bool:
    """Equality of two negated members up to renaming of their local variables."""
    s = set(shared)
    if len(n1) != len(n2):
        return False
    a = _member_canonical(rename_locals_apart(n1, s), s)
    b = _member_canonical(rename_locals_apart(n2, s), s)
    return a == b


def _clean_members(z: CNState) -> list[FluentTerm]:
    """Dedupe negated members by variance and drop members implied by a more general one."""
    shared = z.p_vars()
    members = [_member_canonical(rename_locals_apart(n, shared), shared) for n in z.N]
    uniq = sorted(set(members), key=FluentTerm.key)
    kept = []
    for i, n in enumerate(uniq):
        redundant = False
        for j, m in enumerate(uniq):
            if i == j:
                continue
            if negation_implied(m, rename_locals_apart(n, shared), shared):
                # m at least as general as n; keep exactly one of mutual pairs
                if not negation_implied(n, rename_locals_apart(m, shared), shared) or j < i:
                    redundant = True
                    break
        if not redundant:
            kept.append(n)
    return kept


def _compress(colour: dict) -> dict:
    ranks = {c: i for i, c in enumerate(sorted(set(colour.values())))}
    return {v: ranks[c] for v, c in colour.items()}


def _refined_var_classes(P: FluentTerm, members: list[FluentTerm], pvars: list[str]) -> list[list[str]]:
    """Partition variables into renaming-invariant classes (colour refinement)."""
    colour = {}
    for v in pvars:
        occ = []
        for f in P:
            for i, t in enumerate(f.args):
                if t == v:
                    occ.append(("p", f.symbol, len(f.args), i))
        for n in members:
            for f in n:
                for i, t in enumerate(f.args):
                    if t == v:
                        occ.append(("n", f.symbol, len(f.args), i))
        colour[v] = repr(sorted(occ))
    colour = _compress(colour)
    for _ in range(3):
        new = {}
        for v in pvars:
            ctx = []
            for f in P:
                if v in f.args:
                    ctx.append((f.symbol, tuple(
                        ("self" if t == v else f"v:{colour[t]}" if is_var(t) else "c:" + t) for t in f.args)))
            new[v] = repr((colour[v], sorted(ctx)))
        new = _compress(new)
        stable = len(set(new.values())) == len(set(colour.values()))
        colour = new
        if stable:
            break
    groups: dict[str, list[str]] = {}
    for v in pvars:
        groups.setdefault(colour[v], []).append(v)
    return [sorted(groups[c]) for c in sorted(groups)]


@lru_cache(maxsize=200_000)
def canonicalize(z: CNState) -> CNState:
    """Canonical variant of ``z``.

    Fluents are totally ordered, positive-part variables renamed ``X1..Xn``,
    negation-local variables ``W1..Wk``, negated members deduplicated up to
    variance and members implied by a more general member dropped. Two states
    that are variants of each other map to the same result.
    """
    members = _clean_members(z)
    pvars = z.P.variables()
    if not pvars:
        return CNState(z.P, members)
    shared = set(pvars)
    # locals were already renamed to W*; move them out of the way of X* names
    members = [rename_locals_apart(n, shared) for n in members]
    classes = _refined_var_classes(z.P, members, pvars)
    n_perm = 1
    for c in classes:
        for k in range(2, len(c) + 1):
            n_perm *= k
    if n_perm > MAX_CANONICAL_PERMUTATIONS:
        orderings = [tuple(v for c in classes for v in c)]
    else:
        orderings = (tuple(v for part in combo for v in part)
                     for combo in itertools.product(*(itertools.permutations(c) for c in classes)))
    best = None
    for ordering in orderings:
        ren = {v: f"X{i + 1}" for i, v in enumerate(ordering)}
        P2 = apply_substitution(z.P, ren)
        new_shared = set(ren.values())
        mem2 = sorted((_member_canonical(apply_substitution(n, ren), new_shared) for n in members),
                      key=FluentTerm.key)
        k = (P2.key(), tuple(m.key() for m in mem2))
        if best is None or k < best[0]:
            best = (k, P2, mem2)
    return CNState(best[1], best[2])


def subsumes(z1: CNState, z2: CNState) -> bool:
    """Sound syntactic test for ``Z2 ⊑ Z1`` (every instance of z2 is one of z1).

    Looks for θ mapping z1's positive part into z2's, such that every negated
    member of z1 (under θ) is entailed by some more general negated member
    of z2. May answer False on pairs that are semantically subsumed.
    """
    if len(z1.P) > len(z2.P):
        return False
    have = z2.P.symbol_counts()
    if any(have[k] < n for k, n in z1.P.symbol_counts().items()):
        return False
    if not z1.N:
        return next(iter_matches(z1.P, z2.P), None) is not None
    shared2 = z2.p_vars()
    rigid2 = _rigid(shared2)
    for theta in iter_matches(z1.P, z2.P):
        ok = True
        for n1 in z1.N:
            n1t = rename_locals_apart(apply_substitution(rename_locals_apart(n1, z1.p_vars()), theta), shared2)
            if not any(next(iter_matches(n2, n1t, {v: v for v in n2.variables() if v in rigid2}), None)
                       is not None for n2 in z2.N):
                ok = False
                break
        if ok:
            return True
    return False


# --- unification (two-sided), used for regression ----------------------------

def _walk(t: str, b: dict) -> str:
    while is_var(t) and t in b:
        t = b[t]
    return t


def unify_fluents(pairs: Iterable[tuple[Fluent, Fluent]], binding: Optional[dict] = None) -> Optional[dict]:
    """Most general unifier of flat fluent pairs, or None."""
    b = dict(binding) if binding else {}
    for f, g in pairs:
        if f.symbol != g.symbol or len(f.args) != len(g.args):
            return None
        for s, t in zip(f.args, g.args):
            s, t = _walk(s, b), _walk(t, b)
            if s == t:
                continue
            if is_var(s):
                b[s] = t
            elif is_var(t):
                b[t] = s
            else:
                return None
    return b


def resolve(binding: dict) -> dict:
    """Fully dereference a triangular unifier."""
    return {v: _walk(v, binding) for v in binding}
