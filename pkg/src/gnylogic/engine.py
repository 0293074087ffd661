"""Forward-chaining saturation with provenance.

The knowledge base is a single store holding every principal's statements
(statements are principal-indexed by their head).  Saturation applies the
active rules in catalog order, then their Localize liftings, until nothing
new is derived; the first derivation of a statement is the one recorded.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

from .errors import IterationCapExceeded, NotInTrace
from .formulae import (
    Believes, MetaVar, OptStar, Statement, Term, Universe, belief_depth, children,
    innermost, is_ground, normalize, terms_in,
)
from .rules import Justification, RuleCatalog, instantiate

log = logging.getLogger(__name__)

PRECONDITION = "precondition"
RECEIPT = "receipt"
AUTHOR = "author"


@dataclass(frozen=True)
class EngineConfig:
    max_belief_depth: int = 3
    max_iterations: int = 10000
    r6_enabled: bool = False
    commutative_asym: bool = True
    localize: bool = True

    def __post_init__(self):
        if self.max_belief_depth < 1:
            raise ValueError("max_belief_depth must be at least 1")


def _key(s) -> tuple:
    """Index key: the shape of the belief chain and the innermost head."""
    out = []
    while isinstance(s, Believes):
        out.append("B")
        s = s.s
    if isinstance(s, MetaVar):
        return tuple(out), False
    out.append(type(s).__name__)
    t = getattr(s, "t", None)
    if isinstance(t, Term):
        if isinstance(t, (MetaVar, OptStar)):
            return tuple(out), False
        out.append(type(t).__name__)
    return tuple(out), True


class KnowledgeBase:
    """Ground statements (plus precondition schemas) with first provenance."""

    def __init__(self):
        self._prov: Dict[Statement, Justification] = {}
        self._index: Dict[tuple, list] = {}
        self._schemas: Dict[tuple, list] = {}
        self._prefix_cache: Dict[tuple, list] = {}

    def copy(self) -> "KnowledgeBase":
        kb = KnowledgeBase()
        kb._prov = dict(self._prov)
        kb._index = {k: list(v) for k, v in self._index.items()}
        kb._schemas = {k: list(v) for k, v in self._schemas.items()}
        return kb

    def add(self, s: Statement, justification: Justification) -> bool:
        s = normalize(s)
        if s in self._prov:
            return False
        self._prov[s] = justification
        key, _ = _key(s)
        store = self._index if is_ground(s) else self._schemas
        if key not in store:
            self._prefix_cache.clear()
        store.setdefault(key, []).append(s)
        return True

    def __contains__(self, s) -> bool:
        return s in self._prov

    def __iter__(self) -> Iterator[Statement]:
        return iter(self._prov)

    def __len__(self) -> int:
        return len(self._prov)

    @property
    def statements(self) -> Tuple[Statement, ...]:
        return tuple(self._prov)

    def ground(self) -> frozenset:
        return frozenset(s for s in self._prov if is_ground(s))

    def provenance(self, s: Statement) -> Justification:
        return self._prov[normalize(s)]

    # view protocol used by rules.instantiate
    def candidates(self, pattern):
        return self._lookup(self._index, pattern)

    def schema_candidates(self, pattern):
        if not self._schemas:
            return ()
        return self._lookup(self._schemas, pattern)

    def _lookup(self, store, pattern):
        key, exact = _key(pattern)
        if exact:
            return store.get(key, ())
        ck = (id(store), key)
        keys = self._prefix_cache.get(ck)
        if keys is None:
            keys = [k for k in store if k[:len(key)] == key]
            self._prefix_cache[ck] = keys
        out = []
        for k in keys:
            out.extend(store[k])
        return out

    def trace(self) -> "ProofTrace":
        pos = {}
        nodes = []
        for i, (s, j) in enumerate(self._prov.items()):
            pos[s] = i
            nodes.append(TraceNode(s, j, tuple(pos[p] for p in j.premises)))
        return ProofTrace(tuple(nodes))


@dataclass(frozen=True)
class TraceNode:
    statement: Statement
    justification: Justification
    premises: Tuple[int, ...]


class ProofTrace:
    """Derivation DAG in topological order (premises precede consumers)."""

    def __init__(self, nodes: Tuple[TraceNode, ...] = ()):
        self.nodes = tuple(nodes)
        self._pos = {n.statement: i for i, n in enumerate(self.nodes)}

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def __contains__(self, s) -> bool:
        return normalize(s) in self._pos

    def __eq__(self, other):
        return isinstance(other, ProofTrace) and self.nodes == other.nodes

    def index(self, s: Statement) -> int:
        try:
            return self._pos[normalize(s)]
        except KeyError:
            raise NotInTrace(f"statement not in trace: {s!r}") from None

    def node(self, s: Statement) -> TraceNode:
        return self.nodes[self.index(s)]

    def slice(self, s: Statement) -> "ProofTrace":
        """Backward slice: the nodes needed to derive ``s``, renumbered."""
        root = self.index(s)
        keep = set()
        stack = [root]
        while stack:
            i = stack.pop()
            if i in keep:
                continue
            keep.add(i)
            stack.extend(self.nodes[i].premises)
        order = sorted(keep)
        renum = {old: new for new, old in enumerate(order)}
        return ProofTrace(tuple(
            TraceNode(self.nodes[i].statement, self.nodes[i].justification,
                      tuple(renum[p] for p in self.nodes[i].premises))
            for i in order
        ))


def build_universe(spec) -> Universe:
    """Subterm closure of every term the protocol mentions.

    Covers message terms, precondition and goal statements (including the
    ground parts of schemas and conditional rules), declared derived terms
    and both halves of every declared key pair.
    """
    from .formulae import PrivateKey, PublicKey

    terms: List[Term] = []
    for m in spec.messages:
        terms.append(m.term)
    for pre in spec.preconditions:
        terms.extend(terms_in(pre.statement))
    for r in getattr(spec, "rules", ()):
        for st in r.steps + r.conclusions:
            if isinstance(st, Statement):
                terms.extend(terms_in(st))
    for g in spec.goals:
        terms.extend(terms_in(g.statement))
    terms.extend(spec.derived.values())
    for k in spec.keypairs:
        terms.extend((PublicKey(k), PrivateKey(k)))
    return Universe(terms)


def saturate(kb: KnowledgeBase, catalog: RuleCatalog, universe: Universe,
             config: EngineConfig = EngineConfig()) -> Tuple[KnowledgeBase, ProofTrace]:
    """Least fixed point of the active rules over ``kb`` within ``universe``.

    Returns a new knowledge base and its proof trace; ``kb`` is untouched.
    """
    kb = kb.copy()
    cat = catalog.configured(r6_enabled=config.r6_enabled,
                             commutative_asym=catalog.commutative_asym and config.commutative_asym,
                             localize_enabled=config.localize)
    rules = cat.active(config.max_belief_depth)
    rounds = 0
    while True:
        rounds += 1
        if rounds > config.max_iterations:
            raise IterationCapExceeded(f"no fixed point after {config.max_iterations} rounds")
        added = 0
        for rule in rules:
            for stmt, just in instantiate(rule, kb, universe):
                if belief_depth(stmt) > config.max_belief_depth:
                    continue
                if kb.add(stmt, just):
                    added += 1
        log.debug("round %d: %d new statements", rounds, added)
        if not added:
            break
    return kb, kb.trace()


def holds_goal(kb: KnowledgeBase, goal: Statement) -> Optional[ProofTrace]:
    """The minimal backward slice proving ``goal``, or None if it is not derived."""
    goal = normalize(goal)
    if goal not in kb:
        return None
    return kb.trace().slice(goal)


def explain(trace: ProofTrace, statement: Statement, render=None) -> str:
    """Indented, rule-annotated derivation of ``statement`` (premises nested)."""
    if render is None:
        from .dsl import render_any as render
    root = trace.index(statement)
    lines: List[str] = []
    shown = set()

    def visit(i, depth):
        node = trace.nodes[i]
        pad = "  " * depth
        text = render(node.statement)
        j = node.justification
        if i in shown and node.premises:
            lines.append(f"{pad}{text}    (see above)")
            return
        shown.add(i)
        lines.append(f"{pad}{text}    {describe(j)}")
        for p in node.premises:
            visit(p, depth + 1)

    visit(root, 0)
    return "\n".join(lines) + "\n"


def describe(j: Justification) -> str:
    if j.rule == PRECONDITION:
        return f"assumed [{j.label}]"
    if j.rule == RECEIPT:
        return f"received {j.label}"
    if j.rule == AUTHOR:
        return f"sent {j.label} (author)"
    return f"By ({j.display})"
