"""Term and statement algebra for the GNY belief logic.

Terms are the formulae that travel in messages (nonces, keys, ciphertexts,
hashes, tuples).  Statements are assertions about principals and terms.
Both are immutable, hashable dataclasses; principals are plain strings.

Patterns are ordinary terms/statements that contain :class:`MetaVar` (and,
inside rule premises, :class:`OptStar`) nodes.  :func:`match_all` and
:func:`substitute` work uniformly over terms, statements and principals.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Any, Dict, Iterator, Optional, Tuple, Union

from .errors import UnboundMetaVar

Binding = Dict[str, Any]

STAR = "*"
NOSTAR = ""


class Node:
    """Shared equality/hash for all algebra nodes (hash is cached)."""

    __slots__ = ()

    def _values(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))

    def __eq__(self, other):
        if self is other:
            return True
        if type(other) is not type(self):
            return NotImplemented
        if hash(self) != hash(other):
            return False
        return self._values() == other._values()

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    def __hash__(self):
        try:
            return self.__dict__["_h"]
        except KeyError:
            h = hash((type(self).__name__,) + self._values())
            object.__setattr__(self, "_h", h)
            return h

    def __repr__(self):
        from .dsl import render_any

        return f"<{type(self).__name__} {render_any(self)}>"


class Term(Node):
    __slots__ = ()


class Statement(Node):
    __slots__ = ()


# -- terms -----------------------------------------------------------------

ATOM_KINDS = ("nonce", "timestamp", "sym-key", "stage-tag", "literal")


@dataclass(frozen=True, eq=False, repr=False)
class Atom(Term):
    kind: str
    label: str


@dataclass(frozen=True, eq=False, repr=False)
class Identity(Term):
    principal: Any  # str, or MetaVar in patterns


@dataclass(frozen=True, eq=False, repr=False)
class PublicKey(Term):
    label: Any  # str, or MetaVar in patterns


@dataclass(frozen=True, eq=False, repr=False)
class PrivateKey(Term):
    label: Any


@dataclass(frozen=True, eq=False, repr=False)
class Concat(Term):
    parts: Tuple[Term, ...]


@dataclass(frozen=True, eq=False, repr=False)
class SymEnc(Term):
    body: Term
    key: Term


@dataclass(frozen=True, eq=False, repr=False)
class SymDec(Term):
    body: Term
    key: Term


@dataclass(frozen=True, eq=False, repr=False)
class AsymEnc(Term):
    body: Term
    key: Term


@dataclass(frozen=True, eq=False, repr=False)
class Hash(Term):
    body: Term


@dataclass(frozen=True, eq=False, repr=False)
class Func(Term):
    args: Tuple[Term, ...]


@dataclass(frozen=True, eq=False, repr=False)
class Starred(Term):
    body: Term


@dataclass(frozen=True, eq=False, repr=False)
class Succ(Term):
    body: Term


@dataclass(frozen=True, eq=False, repr=False)
class Quoted(Term):
    statement: Statement


@dataclass(frozen=True, eq=False, repr=False)
class MetaVar(Term):
    """Pattern variable.  Matches a term, a statement or a principal name."""

    name: str


@dataclass(frozen=True, eq=False, repr=False)
class OptStar(Term):
    """Pattern only: matches ``body`` or ``*body`` and records which in ``mark``."""

    mark: MetaVar
    body: Term


# -- statements ------------------------------------------------------------


@dataclass(frozen=True, eq=False, repr=False)
class Sees(Statement):
    p: Any
    t: Term


@dataclass(frozen=True, eq=False, repr=False)
class Holds(Statement):
    p: Any
    t: Term


@dataclass(frozen=True, eq=False, repr=False)
class Said(Statement):
    p: Any
    t: Term


@dataclass(frozen=True, eq=False, repr=False)
class Believes(Statement):
    p: Any
    s: Statement


@dataclass(frozen=True, eq=False, repr=False)
class Fresh(Statement):
    t: Term


@dataclass(frozen=True, eq=False, repr=False)
class FreshAny(Statement):
    """Disjunctive freshness: satisfied when any listed term is fresh."""

    ts: Tuple[Term, ...]


@dataclass(frozen=True, eq=False, repr=False)
class Recognizable(Statement):
    t: Term


@dataclass(frozen=True, eq=False, repr=False)
class SharedSecret(Statement):
    p: Any
    s: Term
    q: Any


@dataclass(frozen=True, eq=False, repr=False)
class PublicKeyOf(Statement):
    k: Term
    q: Any


@dataclass(frozen=True, eq=False, repr=False)
class Controls(Statement):
    p: Any
    target: Statement


@dataclass(frozen=True, eq=False, repr=False)
class Means(Statement):
    x: Term
    c: Statement


@dataclass(frozen=True, eq=False, repr=False)
class Conj(Statement):
    items: Tuple[Statement, ...]


Formula = Union[Term, Statement]
PRINCIPAL_STATEMENTS = (Sees, Holds, Said)


# -- helpers ---------------------------------------------------------------


def concat(*parts: Term) -> Term:
    """Build a canonical concatenation (a single part is returned as is)."""
    return normalize(Concat(tuple(parts)))


def parts(t: Term) -> Tuple[Term, ...]:
    """Components of a concatenation, or the term itself."""
    return t.parts if isinstance(t, Concat) else (t,)


def children(x) -> tuple:
    if isinstance(x, Node):
        out = []
        for v in x._values():
            if isinstance(v, tuple):
                out.extend(v)
            else:
                out.append(v)
        return tuple(out)
    return ()


def is_ground(x) -> bool:
    if isinstance(x, (MetaVar, OptStar)):
        return False
    if isinstance(x, Node):
        return all(is_ground(c) for c in children(x))
    return True


def metavars(x, acc: Optional[set] = None) -> set:
    acc = set() if acc is None else acc
    if isinstance(x, MetaVar):
        acc.add(x.name)
    elif isinstance(x, OptStar):
        acc.add(x.mark.name)
        metavars(x.body, acc)
    elif isinstance(x, Node):
        for c in children(x):
            metavars(c, acc)
    return acc


def strip_stars(t):
    if isinstance(t, Starred):
        return strip_stars(t.body)
    if isinstance(t, Concat):
        return Concat(tuple(strip_stars(p) for p in t.parts))
    return t


def has_star(t) -> bool:
    if isinstance(t, Starred):
        return True
    if isinstance(t, Concat):
        return any(has_star(p) for p in t.parts)
    return False


def belief_depth(s) -> int:
    """Maximum nesting of ``believes`` inside a statement (through targets too)."""
    if isinstance(s, Believes):
        return 1 + belief_depth(s.s)
    if isinstance(s, Controls):
        return belief_depth(s.target)
    if isinstance(s, Means):
        return belief_depth(s.c)
    if isinstance(s, Conj):
        return max((belief_depth(i) for i in s.items), default=0)
    return 0


def innermost(s: Statement) -> Statement:
    while isinstance(s, Believes):
        s = s.s
    return s


def subject_term(s: Statement) -> Optional[Term]:
    """The term a (possibly nested) statement is about, if it has a single one."""
    s = innermost(s)
    if isinstance(s, (Sees, Holds, Said, Fresh, Recognizable)):
        return s.t
    if isinstance(s, SharedSecret):
        return s.s
    if isinstance(s, PublicKeyOf):
        return s.k
    return None


# -- normalization ---------------------------------------------------------


def _pair(a, b) -> bool:
    return (
        isinstance(a, PrivateKey) and isinstance(b, PublicKey)
        or isinstance(a, PublicKey) and isinstance(b, PrivateKey)
    ) and a.label == b.label


def normalize(t):
    """Canonical form of a term or statement.

    Concatenations are flattened, stars never nest and distribute over the
    parts of a concatenation, and encryption followed by the inverse
    operation (public/private halves of one pair, or symmetric
    encrypt/decrypt under one key) cancels.  Idempotent.
    """
    if isinstance(t, Statement):
        return _normalize_statement(t)
    if not isinstance(t, Term) or isinstance(t, (Atom, Identity, PublicKey, PrivateKey, MetaVar)):
        return t
    if isinstance(t, Concat):
        flat = []
        for p in t.parts:
            p = normalize(p)
            flat.extend(p.parts if isinstance(p, Concat) else (p,))
        return flat[0] if len(flat) == 1 else Concat(tuple(flat))
    if isinstance(t, Starred):
        b = normalize(t.body)
        if isinstance(b, Starred):
            return b
        if isinstance(b, Concat):
            return Concat(tuple(p if isinstance(p, Starred) else Starred(p) for p in b.parts))
        return Starred(b)
    if isinstance(t, OptStar):
        return OptStar(t.mark, normalize(t.body))
    if isinstance(t, AsymEnc):
        body, key = normalize(t.body), normalize(t.key)
        if isinstance(body, AsymEnc) and _pair(body.key, key):
            return body.body
        return AsymEnc(body, key)
    if isinstance(t, SymEnc):
        body, key = normalize(t.body), normalize(t.key)
        if isinstance(body, SymDec) and body.key == key:
            return body.body
        return SymEnc(body, key)
    if isinstance(t, SymDec):
        body, key = normalize(t.body), normalize(t.key)
        if isinstance(body, SymEnc) and body.key == key:
            return body.body
        return SymDec(body, key)
    if isinstance(t, Hash):
        return Hash(normalize(t.body))
    if isinstance(t, Succ):
        return Succ(normalize(t.body))
    if isinstance(t, Func):
        return Func(tuple(normalize(a) for a in t.args))
    if isinstance(t, Quoted):
        return Quoted(normalize(t.statement))
    raise TypeError(f"not a term: {t!r}")


def _unstarred(t):
    return strip_stars(normalize(t))


def _sort_key(p):
    return (1, p.name) if isinstance(p, MetaVar) else (0, p)


def _normalize_statement(s: Statement) -> Statement:
    if isinstance(s, MetaVar):
        return s
    if isinstance(s, Sees):
        return Sees(s.p, normalize(s.t))
    if isinstance(s, (Holds, Said)):
        return type(s)(s.p, _unstarred(s.t))
    if isinstance(s, Believes):
        return Believes(s.p, normalize(s.s))
    if isinstance(s, (Fresh, Recognizable)):
        return type(s)(_unstarred(s.t))
    if isinstance(s, FreshAny):
        return FreshAny(tuple(_unstarred(t) for t in s.ts))
    if isinstance(s, SharedSecret):
        p, q = s.p, s.q
        if _sort_key(q) < _sort_key(p):
            p, q = q, p
        return SharedSecret(p, _unstarred(s.s), q)
    if isinstance(s, PublicKeyOf):
        return PublicKeyOf(_unstarred(s.k), s.q)
    if isinstance(s, Controls):
        return Controls(s.p, normalize(s.target))
    if isinstance(s, Means):
        return Means(_unstarred(s.x), normalize(s.c))
    if isinstance(s, Conj):
        out = []
        for item in s.items:
            item = normalize(item)
            for i in item.items if isinstance(item, Conj) else (item,):
                if i not in out:
                    out.append(i)
        return out[0] if len(out) == 1 else Conj(tuple(out))
    raise TypeError(f"not a statement: {s!r}")


# -- subterms and term universes -------------------------------------------


def terms_in(s) -> Iterator[Term]:
    """Top-level terms mentioned by a statement (recursing through statements)."""
    if isinstance(s, Term):
        yield s
        return
    for c in children(s):
        if isinstance(c, Node):
            yield from terms_in(c)


def subterms(t: Term) -> set:
    """``t`` and all of its transitive components (stars removed)."""
    out: set = set()
    _collect(normalize(t), out)
    return out


def _collect(t, out: set) -> None:
    if isinstance(t, Starred):
        _collect(t.body, out)
        return
    if isinstance(t, Concat) and any(isinstance(p, Starred) for p in t.parts):
        t = strip_stars(t)
    if not is_ground(t):
        # patterns contribute their ground pieces only
        if isinstance(t, Quoted):
            for x in terms_in(t.statement):
                _collect(x, out)
            return
        for c in children(t):
            if isinstance(c, Term):
                _collect(c, out)
        return
    if t in out:
        return
    out.add(t)
    if isinstance(t, Quoted):
        for x in terms_in(t.statement):
            _collect(x, out)
        return
    for c in children(t):
        if isinstance(c, Term):
            _collect(c, out)


class Universe:
    """Subterm-closed set of terms bounding constructive rule applications."""

    def __init__(self, terms=()):
        closed: set = set()
        for t in terms:
            closed |= subterms(t)
        self.terms = frozenset(closed)
        self._order = sorted(self.terms, key=_term_order)
        self._supers: Dict[Term, list] = {}
        for z in self._order:
            for x in _direct_parts(z):
                self._supers.setdefault(x, []).append(z)

    def __contains__(self, t) -> bool:
        return strip_stars(t) in self.terms

    def __iter__(self):
        return iter(self._order)

    def __len__(self):
        return len(self.terms)

    def superterms(self, x: Term) -> list:
        """Universe concatenations/functions having ``x`` as a component,
        argument, or contiguous run of components."""
        out = list(self._supers.get(x, ()))
        if isinstance(x, Concat):
            n = len(x.parts)
            for z in self._supers.get(x.parts[0], ()):
                if isinstance(z, Concat) and z not in out:
                    zp = z.parts
                    if any(zp[i:i + n] == x.parts for i in range(len(zp) - n + 1)) and len(zp) > n:
                        out.append(z)
        return out


def _direct_parts(z: Term) -> tuple:
    if isinstance(z, Concat):
        return z.parts
    if isinstance(z, Func):
        return z.args
    if isinstance(z, Succ):
        return (z.body,)
    return ()


def _term_order(t: Term):
    from .dsl import render_any

    return (type(t).__name__, render_any(t))


# -- matching --------------------------------------------------------------


def match_all(pattern, subject, binding: Optional[Binding] = None) -> Iterator[Binding]:
    """Yield every binding extending ``binding`` under which ``pattern``
    equals the ground ``subject``.  Shared secrets match in either order."""
    yield from _m(pattern, subject, dict(binding or {}))


def match(pattern, subject, binding: Optional[Binding] = None) -> Optional[Binding]:
    """First (most general) binding of ``pattern`` against ``subject``, or None."""
    return next(match_all(pattern, subject, binding), None)


def _m(p, s, b: Binding) -> Iterator[Binding]:
    if isinstance(p, MetaVar):
        if p.name in b:
            if b[p.name] == s:
                yield b
        else:
            nb = dict(b)
            nb[p.name] = s
            yield nb
        return
    if isinstance(p, OptStar):
        if isinstance(s, Starred):
            for b2 in _m(p.mark, STAR, b):
                yield from _m(p.body, s.body, b2)
        else:
            for b2 in _m(p.mark, NOSTAR, b):
                yield from _m(p.body, s, b2)
        return
    if isinstance(p, tuple):
        if not isinstance(s, tuple) or len(s) != len(p):
            return
        yield from _m_seq(p, s, 0, b)
        return
    if not isinstance(p, Node):
        if p == s:
            yield b
        return
    if type(p) is not type(s):
        return
    if isinstance(p, SharedSecret):
        yield from _m_seq((p.p, p.s, p.q), (s.p, s.s, s.q), 0, b)
        if s.p != s.q:
            yield from _m_seq((p.p, p.s, p.q), (s.q, s.s, s.p), 0, b)
        return
    yield from _m_seq(p._values(), s._values(), 0, b)


def _m_seq(ps, ss, i, b) -> Iterator[Binding]:
    if i == len(ps):
        yield b
        return
    for b2 in _m(ps[i], ss[i], b):
        yield from _m_seq(ps, ss, i + 1, b2)


def substitute(pattern, binding: Binding, partial: bool = False):
    """Replace metavariables using ``binding``; the result is normalized.

    Raises :class:`UnboundMetaVar` for a variable without a value unless
    ``partial`` is set, in which case it is left in place.
    """
    return normalize(_subst(pattern, binding, partial))


def _subst(p, b: Binding, partial: bool):
    if isinstance(p, MetaVar):
        if p.name in b:
            return b[p.name]
        if partial:
            return p
        raise UnboundMetaVar(p.name)
    if isinstance(p, OptStar):
        body = _subst(p.body, b, partial)
        if p.mark.name in b:
            return Starred(body) if b[p.mark.name] == STAR else body
        if partial:
            return OptStar(p.mark, body)
        raise UnboundMetaVar(p.mark.name)
    if isinstance(p, tuple):
        return tuple(_subst(x, b, partial) for x in p)
    if not isinstance(p, Node) or not _has_vars(p):
        return p
    return type(p)(*(_subst(v, b, partial) for v in p._values()))


def _has_vars(x) -> bool:
    try:
        return x.__dict__["_v"]
    except KeyError:
        v = not is_ground(x)
        object.__setattr__(x, "_v", v)
        return v


# -- two-sided unification (used for precondition schemas) ------------------


def unify(a, b, binding: Optional[Binding] = None) -> Iterator[Binding]:
    """Yield most general unifiers of ``a`` and ``b`` (both may hold variables).

    Variable namespaces are shared, so callers rename one side apart first.
    """
    yield from _u(a, b, dict(binding or {}))


def _walk(x, b):
    while isinstance(x, MetaVar) and x.name in b:
        x = b[x.name]
    return x


def _u(a, c, b: Binding) -> Iterator[Binding]:
    a, c = _walk(a, b), _walk(c, b)
    if isinstance(a, MetaVar) or isinstance(c, MetaVar):
        if a == c:
            yield b
            return
        v, other = (a, c) if isinstance(a, MetaVar) else (c, a)
        nb = dict(b)
        nb[v.name] = other
        yield nb
        return
    if isinstance(a, tuple):
        if not isinstance(c, tuple) or len(a) != len(c):
            return
        yield from _u_seq(a, c, 0, b)
        return
    if not isinstance(a, Node):
        if a == c:
            yield b
        return
    if type(a) is not type(c):
        return
    if isinstance(a, SharedSecret):
        yield from _u_seq((a.p, a.s, a.q), (c.p, c.s, c.q), 0, b)
        yield from _u_seq((a.p, a.s, a.q), (c.q, c.s, c.p), 0, b)
        return
    yield from _u_seq(a._values(), c._values(), 0, b)


def _u_seq(xs, ys, i, b) -> Iterator[Binding]:
    if i == len(xs):
        yield b
        return
    for b2 in _u(xs[i], ys[i], b):
        yield from _u_seq(xs, ys, i + 1, b2)


def resolve(x, b: Binding):
    """Apply a unifier fully (following variable chains)."""
    x = _walk(x, b)
    if isinstance(x, tuple):
        return tuple(resolve(v, b) for v in x)
    if isinstance(x, Node) and not isinstance(x, MetaVar) and _has_vars(x):
        return normalize(type(x)(*(resolve(v, b) for v in x._values())))
    return x


def rename(x, prefix: str):
    """Rename every metavariable in ``x`` by prefixing its name."""
    if isinstance(x, MetaVar):
        return MetaVar(prefix + x.name)
    if isinstance(x, OptStar):
        return OptStar(MetaVar(prefix + x.mark.name), rename(x.body, prefix))
    if isinstance(x, tuple):
        return tuple(rename(v, prefix) for v in x)
    if isinstance(x, Node) and _has_vars(x):
        return type(x)(*(rename(v, prefix) for v in x._values()))
    return x
