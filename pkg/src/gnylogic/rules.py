"""The GNY inference rules as data, plus generic rule application.

A :class:`Rule` is an ordered list of *steps* and a list of conclusion
patterns.  Most steps are statement patterns (premises) matched against a
knowledge-base view; the rest are small binders that enumerate term
structure (components of a tuple, universe superterms, ...) so that the
n-ary concatenation and the term-universe bound can be expressed without
per-rule code.  :func:`instantiate` runs the join for one rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

from .errors import GNYError
from .formulae import (
    AsymEnc, Believes, Concat, Controls, Fresh, FreshAny, Func, Hash, Holds,
    Means, MetaVar, Node, OptStar, PrivateKey, PublicKey, PublicKeyOf,
    Recognizable, Said, Sees, SharedSecret, Starred, Statement, SymDec,
    SymEnc, Term, Universe, belief_depth, innermost, is_ground, match_all,
    metavars, normalize, parts, rename, strip_stars, subject_term, substitute,
)

# -- binders -----------------------------------------------------------------


@dataclass(frozen=True)
class FromUniverse:
    """Bind the variables of ``pattern`` to each matching universe term."""

    pattern: Term


@dataclass(frozen=True)
class Component:
    """Bind ``part`` to each component of the tuple bound to ``whole``
    (or to ``whole`` itself when it is not a tuple)."""

    part: MetaVar
    whole: MetaVar


@dataclass(frozen=True)
class SubTuple:
    """Bind ``part`` to each component, and each shorter contiguous run of
    components that is a universe term, of the tuple bound to ``whole``."""

    part: MetaVar
    whole: MetaVar


@dataclass(frozen=True)
class Superterm:
    """Bind ``whole`` to each universe tuple/function image containing ``part``."""

    whole: MetaVar
    part: MetaVar


PART = MetaVar("_part")
# existential: matches anything and is never bound into conclusions
ANY = MetaVar("_any")


@dataclass(frozen=True)
class EachPart:
    """Premise family: ``pattern`` (with ``?_part``) must hold for every
    component/argument of the tuple or function image bound to ``whole``."""

    whole: MetaVar
    pattern: Statement


BINDERS = (FromUniverse, Component, SubTuple, Superterm)


@dataclass(frozen=True)
class Justification:
    """Why a statement is in a knowledge base.

    ``rule`` is a rule name, or one of ``precondition``, ``receipt``,
    ``author``; ``lift`` counts Localize liftings applied to the rule.
    """

    rule: str
    premises: Tuple[Statement, ...] = ()
    lift: int = 0
    label: Optional[str] = None

    @property
    def display(self) -> str:
        if self.lift:
            return f"Localize({self.rule})" if self.lift == 1 else f"Localize^{self.lift}({self.rule})"
        return self.rule


@dataclass(frozen=True)
class Rule:
    name: str
    steps: tuple
    conclusions: tuple
    constructive: bool = False
    side_conditions: Tuple[str, ...] = ()
    requires: Optional[str] = None
    lift: int = 0
    local: bool = False

    @property
    def premises(self) -> tuple:
        return tuple(s for s in self.steps if isinstance(s, (Statement, EachPart)))

    @property
    def binders(self) -> tuple:
        return tuple(s for s in self.steps if isinstance(s, BINDERS))


class RuleCatalog:
    """The named rules in catalog order, with the Localize/R6/T6 switches."""

    def __init__(self, rules: Sequence[Rule], localize_enabled=True, r6_enabled=False,
                 commutative_asym=True):
        self.rules = tuple(rules)
        self.localize_enabled = localize_enabled
        self.r6_enabled = r6_enabled
        self.commutative_asym = commutative_asym
        self._by_name = {r.name: r for r in self.rules}
        if len(self._by_name) != len(self.rules):
            raise GNYError("duplicate rule names in catalog")

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)

    def names(self) -> List[str]:
        return [r.name for r in self.rules]

    def lookup(self, name: str) -> Rule:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"no rule named {name!r}") from None

    def enabled(self, rule: Rule) -> bool:
        if rule.requires == "commutative_asym":
            return self.commutative_asym
        if rule.requires == "r6":
            return self.r6_enabled
        return True

    def active(self, max_belief_depth: int) -> List[Rule]:
        """Enabled rules followed by their Localize liftings, in fixed order."""
        base = [r for r in self.rules if self.enabled(r)]
        out = list(base)
        if self.localize_enabled:
            for k in range(1, max_belief_depth + 1):
                for r in base:
                    if r.local:
                        continue
                    lifted = lift(r, k)
                    if all(_static_depth(c) <= max_belief_depth for c in lifted.conclusions):
                        out.append(lifted)
        return out

    def configured(self, *, r6_enabled=None, commutative_asym=None, localize_enabled=None,
                   extra: Iterable[Rule] = ()) -> "RuleCatalog":
        return RuleCatalog(
            self.rules + tuple(extra),
            self.localize_enabled if localize_enabled is None else localize_enabled,
            self.r6_enabled if r6_enabled is None else r6_enabled,
            self.commutative_asym if commutative_asym is None else commutative_asym,
        )


def _static_depth(s) -> int:
    return belief_depth(s) if isinstance(s, Statement) else belief_depth(s.pattern)


def lift(rule: Rule, k: int) -> Rule:
    """Localize: wrap every premise and conclusion in ``k`` belief layers."""

    def wrap(s):
        for j in range(k, 0, -1):
            s = Believes(MetaVar(f"L{j}"), s)
        return s

    steps = []
    for st in rule.steps:
        if isinstance(st, Statement):
            steps.append(wrap(st))
        elif isinstance(st, EachPart):
            steps.append(EachPart(st.whole, wrap(st.pattern)))
        else:
            steps.append(st)
    return Rule(rule.name, tuple(steps), tuple(wrap(c) for c in rule.conclusions),
                rule.constructive, rule.side_conditions, rule.requires, rule.lift + k)


# -- the catalog ---------------------------------------------------------------

P, Q, X, Y, Z, K, S, C, M = (MetaVar(n) for n in "PQXYZKSCM")


def _bel(s):
    return Believes(P, s)


def _opt(t):
    return OptStar(M, t)


def _build() -> List[Rule]:
    pubk, privk = PublicKey(K), PrivateKey(K)
    R = []

    def rule(name, steps, conclusions, **kw):
        R.append(Rule(name, tuple(steps), tuple(conclusions), **kw))

    # being told
    rule("T1", [Sees(P, Starred(X))], [Sees(P, X)])
    rule("T2", [Sees(P, Z), SubTuple(X, Z)], [Sees(P, X)])
    rule("T3", [Sees(P, _opt(SymEnc(X, K))), Holds(P, K)], [Sees(P, _opt(X))])
    rule("T4", [Sees(P, _opt(AsymEnc(X, pubk))), Holds(P, privk)], [Sees(P, _opt(X))])
    rule("T5", [Sees(P, _opt(Func((X, Y)))), Holds(P, X)], [Sees(P, _opt(Y))])
    rule("T6", [Sees(P, _opt(AsymEnc(X, privk))), Holds(P, pubk)], [Sees(P, _opt(X))],
         side_conditions=("asymmetric cryptosystem is commutative",), requires="commutative_asym")

    # possession
    rule("P1", [Sees(P, X)], [Holds(P, X)])
    rule("P2", [FromUniverse(Z), EachPart(Z, Holds(P, PART))], [Holds(P, Z)],
         constructive=True, side_conditions=("(X, Y) or F(X, Y) in universe",))
    rule("P3", [Holds(P, Z), SubTuple(X, Z)], [Holds(P, X)])
    rule("P4", [FromUniverse(Hash(X)), Holds(P, X)], [Holds(P, Hash(X))], constructive=True)
    rule("P5", [Holds(P, Func((X, Y))), Holds(P, X)], [Holds(P, Y)])
    rule("P6", [FromUniverse(SymEnc(X, K)), Holds(P, K), Holds(P, X)],
         [Holds(P, SymEnc(X, K)), Holds(P, SymDec(X, K))], constructive=True)
    rule("P7", [FromUniverse(AsymEnc(X, pubk)), Holds(P, pubk), Holds(P, X)],
         [Holds(P, AsymEnc(X, pubk))], constructive=True)
    rule("P8", [FromUniverse(AsymEnc(X, privk)), Holds(P, privk), Holds(P, X)],
         [Holds(P, AsymEnc(X, privk))], constructive=True)

    # freshness
    rule("F1", [_bel(Fresh(X)), Superterm(Z, X)], [_bel(Fresh(Z))], constructive=True)
    rule("F2", [FromUniverse(SymEnc(X, K)), _bel(Fresh(X)), Holds(P, K)],
         [_bel(Fresh(SymEnc(X, K))), _bel(Fresh(SymDec(X, K)))], constructive=True)
    rule("F3", [FromUniverse(AsymEnc(X, pubk)), _bel(Fresh(X)), Holds(P, pubk)],
         [_bel(Fresh(AsymEnc(X, pubk)))], constructive=True)
    rule("F4", [FromUniverse(AsymEnc(X, privk)), _bel(Fresh(X)), Holds(P, privk)],
         [_bel(Fresh(AsymEnc(X, privk)))], constructive=True)
    rule("F5", [_bel(Fresh(pubk))], [_bel(Fresh(privk))], constructive=True)
    rule("F6", [_bel(Fresh(privk))], [_bel(Fresh(pubk))], constructive=True)
    rule("F7", [FromUniverse(SymEnc(X, K)), _bel(Recognizable(X)), _bel(Fresh(K)), Holds(P, K)],
         [_bel(Fresh(SymEnc(X, K))), _bel(Fresh(SymDec(X, K)))], constructive=True)
    rule("F8", [FromUniverse(AsymEnc(X, pubk)), _bel(Recognizable(X)), _bel(Fresh(pubk)),
                Holds(P, pubk)], [_bel(Fresh(AsymEnc(X, pubk)))], constructive=True)
    rule("F9", [FromUniverse(AsymEnc(X, privk)), _bel(Recognizable(X)), _bel(Fresh(privk)),
                Holds(P, privk)], [_bel(Fresh(AsymEnc(X, privk)))], constructive=True)
    rule("F10", [FromUniverse(Hash(X)), _bel(Fresh(X)), Holds(P, X)],
         [_bel(Fresh(Hash(X)))], constructive=True)
    rule("F11", [_bel(Fresh(Hash(X))), Holds(P, Hash(X))], [_bel(Fresh(X))], constructive=True)

    # recognizability
    rule("R1", [_bel(Recognizable(X)), Superterm(Z, X)], [_bel(Recognizable(Z))], constructive=True)
    rule("R2", [FromUniverse(SymEnc(X, K)), _bel(Recognizable(X)), Holds(P, K)],
         [_bel(Recognizable(SymEnc(X, K))), _bel(Recognizable(SymDec(X, K)))], constructive=True)
    rule("R3", [FromUniverse(AsymEnc(X, pubk)), _bel(Recognizable(X)), Holds(P, pubk)],
         [_bel(Recognizable(AsymEnc(X, pubk)))], constructive=True)
    rule("R4", [FromUniverse(AsymEnc(X, privk)), _bel(Recognizable(X)), Holds(P, privk)],
         [_bel(Recognizable(AsymEnc(X, privk)))], constructive=True)
    rule("R5", [FromUniverse(Hash(X)), _bel(Recognizable(X)), Holds(P, X)],
         [_bel(Recognizable(Hash(X)))], constructive=True)
    rule("R6", [Holds(P, Hash(K)), FromUniverse(X)], [_bel(Recognizable(X))],
         constructive=True, requires="r6")

    # message interpretation
    rule("I1", [Sees(P, Starred(SymEnc(X, K))), Holds(P, K), _bel(SharedSecret(P, K, Q)),
                _bel(Recognizable(X)), _bel(FreshAny((X, K)))],
         [_bel(Said(Q, X)), _bel(Said(Q, SymEnc(X, K))), _bel(Holds(Q, K))])
    rule("I2", [Sees(P, Starred(AsymEnc(Y, pubk))), Component(S, Y), Holds(P, privk), Holds(P, S),
                _bel(PublicKeyOf(pubk, P)), _bel(SharedSecret(P, S, Q)), _bel(Recognizable(Y)),
                _bel(FreshAny((Y, S, pubk)))],
         [_bel(Said(Q, Y)), _bel(Said(Q, AsymEnc(Y, pubk))), _bel(Holds(Q, pubk))],
         side_conditions=("identifying secret S is a component of the body",))
    rule("I3", [Sees(P, Starred(Hash(Y))), Component(S, Y), Holds(P, Y), _bel(SharedSecret(P, S, Q)),
                _bel(FreshAny((Y, S)))],
         [_bel(Said(Q, Y)), _bel(Said(Q, Hash(Y)))],
         side_conditions=("identifying secret S is a component of the hashed tuple",))
    rule("I4", [Sees(P, _opt(AsymEnc(X, privk))), Holds(P, pubk), _bel(PublicKeyOf(pubk, Q)),
                _bel(Recognizable(X))],
         [_bel(Said(Q, X)), _bel(Said(Q, AsymEnc(X, privk)))])
    rule("I5", [Sees(P, _opt(AsymEnc(X, privk))), Holds(P, pubk), _bel(PublicKeyOf(pubk, Q)),
                _bel(Recognizable(X)), _bel(FreshAny((X, pubk)))],
         [_bel(Holds(Q, Concat((privk, X))))])
    rule("I6", [_bel(Said(Q, X)), _bel(Fresh(X))], [_bel(Holds(Q, X))])
    rule("I7", [_bel(Said(Q, Z)), SubTuple(X, Z)], [_bel(Said(Q, X))])

    # jurisdiction
    rule("J1", [_bel(Believes(Q, C)), _bel(Controls(Q, C))], [_bel(C)])
    rule("J2", [_bel(Said(Q, X)), _bel(Means(X, C)), _bel(Controls(Q, Believes(Q, ANY))),
                _bel(Fresh(X))], [_bel(Believes(Q, C))],
         side_conditions=("Q has jurisdiction over some belief of its own",))
    rule("J3", [_bel(Believes(Q, Believes(Q, C))), _bel(Controls(Q, Believes(Q, C)))],
         [_bel(Believes(Q, C))])
    return R


RULE_NAMES = tuple(
    [f"T{i}" for i in range(1, 7)] + [f"P{i}" for i in range(1, 9)]
    + [f"F{i}" for i in range(1, 12)] + [f"R{i}" for i in range(1, 7)]
    + [f"I{i}" for i in range(1, 8)] + [f"J{i}" for i in range(1, 4)]
)
LOCALIZE = "Localize"
_CATALOG_RULES = tuple(_build())


def catalog(*, r6_enabled=False, commutative_asym=True, localize_enabled=True) -> RuleCatalog:
    """The complete rule catalog (deterministic, catalog order)."""
    return RuleCatalog(_CATALOG_RULES, localize_enabled, r6_enabled, commutative_asym)


# -- rule application -------------------------------------------------------------


class SetView:
    """Knowledge-base view over a plain collection of statements.

    Statements containing metavariables are treated as schemas: a premise
    is satisfied by any ground instance of one.
    """

    def __init__(self, statements: Iterable[Statement]):
        self.facts = []
        self.schemas = []
        seen = set()
        for s in statements:
            s = normalize(s)
            if s in seen:
                continue
            seen.add(s)
            (self.facts if is_ground(s) else self.schemas).append(s)
        self._set = set(self.facts)

    def __contains__(self, s) -> bool:
        return s in self._set

    def candidates(self, pattern) -> Iterable[Statement]:
        return self.facts

    def schema_candidates(self, pattern) -> Iterable[Statement]:
        return self.schemas


def as_view(kb_view):
    if hasattr(kb_view, "candidates") and hasattr(kb_view, "schema_candidates"):
        return kb_view
    return SetView(kb_view)


def as_universe(universe) -> Universe:
    return universe if isinstance(universe, Universe) else Universe(universe or ())


def instantiate(rule: Rule, kb_view, universe) -> List[Tuple[Statement, Justification]]:
    """Every conclusion of ``rule`` obtainable from ``kb_view``.

    Each conclusion carries a :class:`Justification` naming the rule and the
    premise statements used.  Constructive rules only conclude statements
    whose subject term lies in ``universe``.
    """
    view = as_view(kb_view)
    uni = as_universe(universe)
    out = []
    for binding, prem in solve(rule.steps, view, uni, {}):
        just = Justification(rule.name, tuple(prem), rule.lift)
        for pat in rule.conclusions:
            c = substitute(pat, binding)
            if rule.constructive:
                t = subject_term(c)
                if t is not None and t not in uni:
                    continue
            out.append((c, just))
    return out


def solve(steps, view, uni: Universe, binding) -> Iterator[tuple]:
    """Depth-first join over rule steps; yields (binding, premises) pairs."""
    yield from _solve(tuple(steps), 0, view, uni, binding, ())


def _solve(steps, i, view, uni, b, prem):
    if i == len(steps):
        yield b, prem
        return
    st = steps[i]
    if isinstance(st, Statement):
        for b2, used in _premise(st, view, b):
            yield from _solve(steps, i + 1, view, uni, b2, prem + (used,))
    elif isinstance(st, EachPart):
        whole = b[st.whole.name]
        group = tuple(substitute(st.pattern, {**b, PART.name: p}, partial=True)
                      for p in _args(whole))
        if not group:
            return
        yield from _solve(group + steps[i + 1:], 0, view, uni, b, prem)
    elif isinstance(st, FromUniverse):
        for t in uni:
            for b2 in match_all(st.pattern, t, b):
                yield from _solve(steps, i + 1, view, uni, b2, prem)
    elif isinstance(st, Component):
        whole = b[st.whole.name]
        for p in parts(strip_stars(whole)):
            for b2 in match_all(st.part, p, b):
                yield from _solve(steps, i + 1, view, uni, b2, prem)
    elif isinstance(st, SubTuple):
        for p in _subtuples(b[st.whole.name], uni):
            for b2 in match_all(st.part, p, b):
                yield from _solve(steps, i + 1, view, uni, b2, prem)
    elif isinstance(st, Superterm):
        for z in uni.superterms(strip_stars(b[st.part.name])):
            for b2 in match_all(st.whole, z, b):
                yield from _solve(steps, i + 1, view, uni, b2, prem)
    else:
        raise TypeError(f"unknown rule step {st!r}")


def _args(t) -> tuple:
    t = strip_stars(t)
    if isinstance(t, Concat):
        return t.parts
    if isinstance(t, Func):
        return t.args
    return ()


def _subtuples(z, uni: Universe) -> list:
    if not isinstance(z, Concat):
        return []
    ps = z.parts
    out = list(ps)
    n = len(ps)
    for size in range(2, n):
        for i in range(n - size + 1):
            sub = Concat(ps[i:i + size])
            if sub in uni and sub not in out:
                out.append(sub)
    return out


def _freshany_alternatives(s):
    inner = innermost(s)
    if not isinstance(inner, FreshAny):
        return None
    alts = []
    for t in inner.ts:
        alt = Fresh(t)
        node = s
        chain = []
        while isinstance(node, Believes):
            chain.append(node.p)
            node = node.s
        for p in reversed(chain):
            alt = Believes(p, alt)
        alts.append(normalize(alt))
    return alts


def _premise(pattern, view, b):
    s = substitute(pattern, b, partial=True)
    if is_ground(s):
        alts = _freshany_alternatives(s)
        for cand in alts if alts is not None else (s,):
            used = _entailed(cand, view)
            if used is not None:
                yield b, used
                return
        return
    names = metavars(s)
    for c in view.candidates(s):
        for b2 in match_all(s, c, b):
            yield b2, c
    for sigma in view.schema_candidates(s):
        for b2 in _match_schema(s, sigma, b, names):
            yield b2, sigma


def _entailed(s, view):
    if s in view:
        return s
    for sigma in view.schema_candidates(s):
        if next(match_all(sigma, s), None) is not None:
            return sigma
    return None


def _match_schema(s, sigma, b, names):
    from .formulae import resolve, unify

    renamed = rename(sigma, "~")
    for u in unify(s, renamed):
        b2 = dict(b)
        for n in names:
            v = resolve(MetaVar(n), u)
            if n == ANY.name:
                continue
            if not is_ground(v):
                break
            b2[n] = v
        else:
            yield b2
