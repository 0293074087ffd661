"""The ``.gny`` protocol description format, statement rendering and trace export.

A file is line oriented; ``#`` starts a comment.  Sections::

    protocol tls-named-server
    flags commutative-asym
    principals A, B, C
    declare      # nonce/timestamp/symkey/tag/literal/keypair/derive lines
    messages     # M1: A -> B : (N_A, T_A)
    assume       # [label] statement   or   [label] prem, ... => concl, ...
    goals        # [label] statement

Statements and terms use ASCII keywords (``believes``, ``holds``,
``enc{X}K``, ``pub(K)``, ...); ``?X`` is a schema variable.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import GNYError, ParseFailure, SpecError
from .formulae import (
    AsymEnc, Atom, Believes, Concat, Conj, Controls, Fresh, FreshAny, Func,
    Hash, Holds, Identity, Means, MetaVar, Node, OptStar, PrivateKey,
    PublicKey, PublicKeyOf, Quoted, Recognizable, Said, Sees, SharedSecret,
    Starred, Statement, Succ, SymDec, SymEnc, Term, normalize,
)

KIND_WORDS = {
    "nonce": "nonce", "timestamp": "timestamp", "symkey": "sym-key",
    "tag": "stage-tag", "literal": "literal",
}
KIND_NAMES = {v: k for k, v in KIND_WORDS.items()}
VERBS = ("believes", "holds", "sees", "said", "controls", "shares")
RESERVED = set(VERBS) | {
    "means", "with", "of", "fresh", "fresh_any", "recog", "pubkey", "all",
    "pub", "priv", "id", "H", "F", "succ", "quote", "enc", "dec",
}
SECTIONS = ("protocol", "flags", "principals", "declare", "messages", "assume", "goals")
FLAGS = ("commutative-asym",)


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 1


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    message: str
    expected: Tuple[str, ...] = ()

    def __str__(self):
        exp = f" (expected {', '.join(self.expected)})" if self.expected else ""
        return f"{self.span.line}:{self.span.column}: {self.message}{exp}"


# -- lexer -----------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<label>\[[^\]\s]*\])
  | (?P<var>\?[A-Za-z_][A-Za-z0-9_']*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<string>"[^"]*")
  | (?P<arrow>->|=>)
  | (?P<punct>[(){},:*=;])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    col: int  # 1-based


def tokenize(line: str, lineno: int = 1) -> List[Token]:
    toks = []
    pos = 0
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        if not m:
            raise ParseFailure([ParseError(SourceSpan(lineno, pos + 1), f"unexpected character {line[pos]!r}")])
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            toks.append(Token("punct" if kind == "arrow" else kind, text, pos + 1))
        pos = m.end()
    return toks


def _strip_comment(line: str) -> str:
    out = []
    quoted = False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out).rstrip()


# -- parsing context -------------------------------------------------------------


@dataclass
class Context:
    principals: set = field(default_factory=set)
    atoms: Dict[str, Atom] = field(default_factory=dict)
    keypairs: set = field(default_factory=set)
    aliases: Dict[str, Term] = field(default_factory=dict)
    allow_star: bool = True
    allow_vars: bool = True

    @classmethod
    def from_spec(cls, spec) -> "Context":
        return cls(set(spec.principals), {a.label: a for a in spec.atoms},
                   set(spec.keypairs), spec.aliases())


class _Fail(Exception):
    def __init__(self, col, length, message, expected=()):
        super().__init__(message)
        self.col, self.length, self.message, self.expected = col, length, message, tuple(expected)


class _LineParser:
    def __init__(self, tokens: List[Token], ctx: Context, line_len: int):
        self.toks = tokens
        self.ctx = ctx
        self.i = 0
        self.end_col = line_len + 1

    # token helpers
    def peek(self, k=0) -> Optional[Token]:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text, k=0) -> bool:
        t = self.peek(k)
        return t is not None and t.kind in ("punct", "ident") and t.text == text

    def fail(self, message, expected=(), tok=None):
        tok = tok if tok is not None else self.peek()
        if tok is None:
            # ran off the end: blame the innermost unclosed bracket, else the last token
            opener = self._unclosed()
            if opener is not None:
                message = f"{message}; {opener.text!r} at column {opener.col} is never closed"
                tok = opener
            elif self.toks:
                tok = self.toks[-1]
            else:
                raise _Fail(self.end_col, 1, message, expected)
        raise _Fail(tok.col, len(tok.text), message, expected)

    def _unclosed(self) -> Optional[Token]:
        stack = []
        for t in self.toks[:self.i]:
            if t.kind != "punct":
                continue
            if t.text in "({":
                stack.append(t)
            elif t.text in ")}" and stack:
                stack.pop()
        return stack[-1] if stack else None

    def expect(self, text) -> Token:
        t = self.peek()
        if t is None or t.text != text or t.kind not in ("punct", "ident"):
            found = "end of line" if t is None else repr(t.text)
            self.fail(f"expected {text!r}, found {found}", (repr(text),))
        self.i += 1
        return t

    def ident(self, what="identifier") -> Token:
        t = self.peek()
        if t is None or t.kind != "ident":
            found = "end of line" if t is None else repr(t.text)
            self.fail(f"expected {what}, found {found}", (what,))
        self.i += 1
        return t

    def done(self):
        t = self.peek()
        if t is not None:
            self.fail(f"unexpected {t.text!r}", ("end of line",))

    def var(self) -> MetaVar:
        t = self.peek()
        if not self.ctx.allow_vars:
            self.fail("schema variables are not allowed here")
        self.i += 1
        return MetaVar(t.text[1:])

    # principals
    def principal(self):
        t = self.peek()
        if t is not None and t.kind == "var":
            return self.var()
        t = self.ident("principal")
        if t.text not in self.ctx.principals:
            raise _Fail(t.col, len(t.text), f"undeclared principal {t.text}", ("principal",))
        return t.text

    def _is_principal_start(self) -> bool:
        t = self.peek()
        nxt = self.peek(1)
        if t is None:
            return False
        if t.kind == "ident" and t.text in self.ctx.principals:
            return True
        return t.kind == "var" and nxt is not None and nxt.kind == "ident" and nxt.text in VERBS

    # statements
    def statement(self) -> Statement:
        t = self.peek()
        if t is None:
            self.fail("expected a statement", ("statement",))
        if t.kind == "punct" and t.text == "(":
            save = self.i
            try:
                self.i += 1
                s = self.statement()
                self.expect(")")
                return s
            except _Fail as first:
                self.i = save
                try:
                    return self._means()
                except _Fail as second:
                    raise max(first, second, key=lambda f: f.col)
        if t.kind == "ident":
            w = t.text
            if w in ("fresh", "recog") and self.at("(", 1):
                self.i += 1
                self.expect("(")
                x = self.term()
                self.expect(")")
                return Fresh(x) if w == "fresh" else Recognizable(x)
            if w == "fresh_any":
                self.i += 1
                return FreshAny(tuple(self._group("(", ")")))
            if w == "pubkey":
                self.i += 1
                self.expect("(")
                label = self._key_label()
                self.expect(")")
                self.expect("of")
                return PublicKeyOf(PublicKey(label), self.principal())
            if w == "all":
                self.i += 1
                self.expect("(")
                items = [self.statement()]
                while self.at(";"):
                    self.i += 1
                    items.append(self.statement())
                self.expect(")")
                return Conj(tuple(items))
        if self._is_principal_start():
            p = self.principal()
            v = self.peek()
            if v is None or v.kind != "ident" or v.text not in VERBS:
                self.fail("expected a verb after principal", VERBS)
            self.i += 1
            if v.text == "believes":
                return Believes(p, self.statement())
            if v.text == "controls":
                return Controls(p, self.statement())
            if v.text == "shares":
                secret = self.term()
                self.expect("with")
                return SharedSecret(p, secret, self.principal())
            x = self.term()
            return {"holds": Holds, "sees": Sees, "said": Said}[v.text](p, x)
        if t.kind == "var" and not (self.at("means", 1)):
            nxt = self.peek(1)
            if nxt is None or nxt.text in (")", ",", ";", "=>"):
                return self.var()
        return self._means()

    def _means(self) -> Statement:
        x = self.term()
        if not self.at("means"):
            self.fail("expected 'means' after a term (or a principal-headed statement)", ("means",))
        self.i += 1
        return Means(x, self.statement())

    def _group(self, open_, close) -> List[Term]:
        self.expect(open_)
        items = [self.term()]
        while self.at(","):
            self.i += 1
            items.append(self.term())
        self.expect(close)
        return items

    def _key_label(self):
        t = self.peek()
        if t is not None and t.kind == "var":
            return self.var()
        t = self.ident("key pair name")
        if t.text not in self.ctx.keypairs:
            raise _Fail(t.col, len(t.text), f"undeclared key pair {t.text}", ("key pair",))
        return t.text

    # terms
    def term(self) -> Term:
        t = self.peek()
        if t is not None and t.kind == "punct" and t.text == "*":
            if not self.ctx.allow_star:
                self.fail("'*' marks are produced by the engine and are not allowed in source")
            self.i += 1
            return Starred(self.term())
        return self.primary()

    def primary(self) -> Term:
        t = self.peek()
        if t is None:
            self.fail("expected a term", ("term",))
        if t.kind == "punct" and t.text == "(":
            return Concat(tuple(self._group("(", ")")))
        if t.kind == "var":
            return self.var()
        if t.kind != "ident":
            self.fail(f"expected a term, found {t.text!r}", ("term",))
        w = t.text
        if w in ("pub", "priv") and self.at("(", 1):
            self.i += 1
            self.expect("(")
            label = self._key_label()
            self.expect(")")
            return PublicKey(label) if w == "pub" else PrivateKey(label)
        if w == "id" and self.at("(", 1):
            self.i += 1
            self.expect("(")
            p = self.principal()
            self.expect(")")
            return Identity(p)
        if w == "H" and self.at("(", 1):
            self.i += 1
            return Hash(Concat(tuple(self._group("(", ")"))))
        if w == "F" and self.at("(", 1):
            self.i += 1
            return Func(tuple(self._group("(", ")")))
        if w == "succ" and self.at("(", 1):
            self.i += 1
            self.expect("(")
            x = self.term()
            self.expect(")")
            return Succ(x)
        if w == "quote" and self.at("(", 1):
            self.i += 1
            self.expect("(")
            s = self.statement()
            self.expect(")")
            return Quoted(s)
        if w in ("enc", "dec") and self.at("{", 1):
            self.i += 1
            body = Concat(tuple(self._group("{", "}")))
            key_tok = self.peek()
            key = self.primary()
            if isinstance(key, (PublicKey, PrivateKey)):
                if w == "dec":
                    raise _Fail(key_tok.col, len(key_tok.text), "dec{...} takes a symmetric key", ("symmetric key",))
                return AsymEnc(body, key)
            return SymEnc(body, key) if w == "enc" else SymDec(body, key)
        if w in RESERVED:
            self.fail(f"{w!r} cannot be used as a term here", ("term",))
        self.i += 1
        if w in self.ctx.atoms:
            return self.ctx.atoms[w]
        if w in self.ctx.aliases:
            return self.ctx.aliases[w]
        raise _Fail(t.col, len(w), f"undeclared symbol {w}", ("declared atom or alias",))


def _fail_to_error(f: _Fail, lineno: int) -> ParseError:
    return ParseError(SourceSpan(lineno, f.col, f.length), f.message, f.expected)


def parse_statement(text: str, ctx: Optional[Context] = None) -> Statement:
    """Parse one statement (``*`` marks and schema variables allowed)."""
    ctx = ctx or Context()
    toks = tokenize(text)
    p = _LineParser(toks, ctx, len(text))
    try:
        s = p.statement()
        p.done()
    except _Fail as f:
        raise ParseFailure([_fail_to_error(f, 1)]) from None
    return normalize(s)


def parse_term(text: str, ctx: Optional[Context] = None) -> Term:
    ctx = ctx or Context()
    p = _LineParser(tokenize(text), ctx, len(text))
    try:
        t = p.term()
        p.done()
    except _Fail as f:
        raise ParseFailure([_fail_to_error(f, 1)]) from None
    return normalize(t)


# -- spec files ------------------------------------------------------------------


def parse_spec(text: str):
    """Parse and validate a ``.gny`` file.

    Every recoverable error is collected; on any error :class:`ParseFailure`
    is raised with all of them, so no partial spec ever escapes.
    """
    from .protocol import Goal, Message, Precondition, ProtocolSpec
    from .rules import Rule

    errors: List[ParseError] = []
    ctx = Context(allow_star=False)
    name = None
    flags = set()
    atoms: List[Atom] = []
    keypairs: List[str] = []
    derived: Dict[str, Term] = {}
    display: Dict[str, str] = {}
    messages: List = []
    pres: List = []
    rules: List = []
    goals: List = []
    seen_sections = set()
    section = None
    used_names: Dict[str, str] = {}
    labels = {"assume": set(), "goals": set()}
    principal_order: List[str] = []

    def define(tok: Token, what: str):
        if tok.text in RESERVED:
            raise _Fail(tok.col, len(tok.text), f"{tok.text!r} is a reserved word", (what,))
        if tok.text in used_names:
            raise _Fail(tok.col, len(tok.text), f"{tok.text} is already declared ({used_names[tok.text]})", (what,))
        used_names[tok.text] = what

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        head = line.split(None, 1)[0]
        if head in ("protocol", "flags") and not line[0].isspace():
            toks = [Token("ident", head, 1)]
        else:
            try:
                toks = tokenize(line, lineno)
            except ParseFailure as e:
                errors.extend(e.errors)
                continue
        p = _LineParser(toks, ctx, len(line))
        first = toks[0]
        try:
            if first.kind == "ident" and first.text in ("protocol", "flags") and first.col == 1:
                section = first.text
                seen_sections.add(section)
                words = line[len(first.text):].replace(",", " ").split()
                if section == "protocol":
                    if len(words) != 1:
                        p.i = min(len(toks), 2)
                        p.fail("expected a single protocol name", ("name",))
                    name = words[0]
                    continue
                for w in words:
                    if w not in FLAGS:
                        raise _Fail(line.index(w) + 1, len(w), f"unknown flag {w}", FLAGS)
                    flags.add(w)
                continue
            if first.kind == "ident" and first.text in SECTIONS and first.col == 1:
                section = first.text
                seen_sections.add(section)
                p.i = 1
                if section == "principals":
                    while True:
                        t = p.ident("principal name")
                        define(t, "principal")
                        ctx.principals.add(t.text)
                        principal_order.append(t.text)
                        if not p.at(","):
                            break
                        p.i += 1
                    p.done()
                    continue
                p.done()
                continue
            if section is None:
                p.fail("expected a section keyword", SECTIONS)
            if section == "declare":
                kw = p.ident("declaration keyword")
                if kw.text in KIND_WORDS:
                    t = p.ident("atom name")
                    define(t, "atom")
                    atom = Atom(KIND_WORDS[kw.text], t.text)
                    ctx.atoms[t.text] = atom
                    atoms.append(atom)
                    if p.peek() is not None and p.peek().kind == "string":
                        display[t.text] = p.peek().text[1:-1]
                        p.i += 1
                    while p.at(","):
                        p.i += 1
                        t = p.ident("atom name")
                        define(t, "atom")
                        atom = Atom(KIND_WORDS[kw.text], t.text)
                        ctx.atoms[t.text] = atom
                        atoms.append(atom)
                    p.done()
                elif kw.text == "keypair":
                    while True:
                        t = p.ident("key pair name")
                        define(t, "key pair")
                        keypairs.append(t.text)
                        ctx.keypairs.add(t.text)
                        if not p.at(","):
                            break
                        p.i += 1
                    p.done()
                elif kw.text == "derive":
                    t = p.ident("alias name")
                    define(t, "alias")
                    p.expect("=")
                    ctx.allow_vars = False
                    try:
                        value = normalize(p.term())
                    finally:
                        ctx.allow_vars = True
                    p.done()
                    derived[t.text] = value
                    ctx.aliases[t.text] = value
                else:
                    raise _Fail(kw.col, len(kw.text), f"unknown declaration {kw.text!r}",
                                tuple(KIND_WORDS) + ("keypair", "derive"))
            elif section == "messages":
                lab = p.ident("message label")
                define(lab, "message")
                p.expect(":")
                sender = p.principal()
                p.expect("->")
                receiver = p.principal()
                p.expect(":")
                ctx.allow_vars = False
                try:
                    term = normalize(p.term())
                finally:
                    ctx.allow_vars = True
                p.done()
                messages.append(Message(len(messages), lab.text, sender, receiver, term))
                ctx.aliases[lab.text] = term
            elif section in ("assume", "goals"):
                t = p.peek()
                if t is None or t.kind != "label" or len(t.text) < 3:
                    p.fail("expected a [label]", ("[label]",))
                p.i += 1
                label = t.text[1:-1]
                if label in labels[section]:
                    p.fail(f"duplicate label [{label}] in {section}", tok=t)
                labels[section].add(label)
                first_stmt = p.statement()
                if section == "goals":
                    p.done()
                    goals.append(Goal(normalize(first_stmt), label))
                else:
                    prems = [first_stmt]
                    while p.at(","):
                        p.i += 1
                        prems.append(p.statement())
                    if p.at("=>"):
                        p.i += 1
                        concl = [p.statement()]
                        while p.at(","):
                            p.i += 1
                            concl.append(p.statement())
                        p.done()
                        rules.append(Rule(label, tuple(normalize(s) for s in prems),
                                          tuple(normalize(s) for s in concl), local=True))
                    else:
                        p.done()
                        if len(prems) > 1:
                            p.fail("several statements without '=>'", ("=>",), tok=t)
                        pres.append(Precondition(normalize(first_stmt), label))
        except _Fail as f:
            errors.append(_fail_to_error(f, lineno))

    for required in ("protocol", "principals"):
        if required not in seen_sections:
            errors.append(ParseError(SourceSpan(1, 1, 1), f"missing section '{required}'", (required,)))
    if errors:
        raise ParseFailure(errors)
    spec = ProtocolSpec(
        name=name, principals=tuple(principal_order),
        atoms=tuple(atoms), keypairs=tuple(keypairs), derived=derived,
        preconditions=tuple(pres), rules=tuple(rules), messages=tuple(messages),
        goals=tuple(goals), commutative_asym="commutative-asym" in flags, display=display,
    )
    try:
        return spec.validate()
    except SpecError as e:
        raise ParseFailure([ParseError(SourceSpan(1, 1, 1), str(e))]) from None


# -- rendering -------------------------------------------------------------------


def _principal(p) -> str:
    return f"?{p.name}" if isinstance(p, MetaVar) else str(p)


class Renderer:
    """Text rendering, optionally abbreviating terms by alias names."""

    def __init__(self, aliases: Optional[Dict[str, Term]] = None):
        self.names: Dict[Term, str] = {}
        for name, t in (aliases or {}).items():
            if not isinstance(t, Atom) and t not in self.names:
                self.names[t] = name

    def __call__(self, x) -> str:
        return self.any(x)

    def any(self, x) -> str:
        if isinstance(x, Statement):
            return self.statement(x)
        if isinstance(x, Term):
            return self.term(x)
        return _principal(x)

    def term(self, t) -> str:
        if t in self.names:
            return self.names[t]
        if isinstance(t, Atom):
            return t.label
        if isinstance(t, MetaVar):
            return f"?{t.name}"
        if isinstance(t, Identity):
            return f"id({_principal(t.principal)})"
        if isinstance(t, PublicKey):
            return f"pub({_principal(t.label)})"
        if isinstance(t, PrivateKey):
            return f"priv({_principal(t.label)})"
        if isinstance(t, Concat):
            return "(" + ", ".join(self.term(p) for p in t.parts) + ")"
        if isinstance(t, (SymEnc, SymDec, AsymEnc)):
            kw = "dec" if isinstance(t, SymDec) else "enc"
            return f"{kw}{{{self._inner(t.body)}}}{self.term(t.key)}"
        if isinstance(t, Hash):
            return f"H({self._inner(t.body)})"
        if isinstance(t, Func):
            return "F(" + ", ".join(self.term(a) for a in t.args) + ")"
        if isinstance(t, Starred):
            return "*" + self.term(t.body)
        if isinstance(t, Succ):
            return f"succ({self.term(t.body)})"
        if isinstance(t, Quoted):
            return f"quote({self.statement(t.statement)})"
        if isinstance(t, OptStar):
            return "[*]" + self.term(t.body)
        raise TypeError(f"cannot render {t!r}")

    def _inner(self, body) -> str:
        if isinstance(body, Concat) and body not in self.names:
            return ", ".join(self.term(p) for p in body.parts)
        return self.term(body)

    def _nested(self, s) -> str:
        text = self.statement(s)
        if isinstance(s, (Believes, Controls, Means, Conj)):
            return f"({text})"
        return text

    def statement(self, s) -> str:
        if isinstance(s, MetaVar):
            return f"?{s.name}"
        if isinstance(s, Sees):
            return f"{_principal(s.p)} sees {self.term(s.t)}"
        if isinstance(s, Holds):
            return f"{_principal(s.p)} holds {self.term(s.t)}"
        if isinstance(s, Said):
            return f"{_principal(s.p)} said {self.term(s.t)}"
        if isinstance(s, Believes):
            return f"{_principal(s.p)} believes {self._nested(s.s)}"
        if isinstance(s, Fresh):
            return f"fresh({self.term(s.t)})"
        if isinstance(s, FreshAny):
            return "fresh_any(" + ", ".join(self.term(t) for t in s.ts) + ")"
        if isinstance(s, Recognizable):
            return f"recog({self.term(s.t)})"
        if isinstance(s, SharedSecret):
            return f"{_principal(s.p)} shares {self.term(s.s)} with {_principal(s.q)}"
        if isinstance(s, PublicKeyOf):
            if isinstance(s.k, PublicKey):
                return f"pubkey({_principal(s.k.label)}) of {_principal(s.q)}"
            return f"pubkey({self.term(s.k)}) of {_principal(s.q)}"
        if isinstance(s, Controls):
            return f"{_principal(s.p)} controls {self._nested(s.target)}"
        if isinstance(s, Means):
            return f"{self.term(s.x)} means {self._nested(s.c)}"
        if isinstance(s, Conj):
            return "all(" + "; ".join(self.statement(i) for i in s.items) + ")"
        raise TypeError(f"cannot render {s!r}")


_PLAIN = Renderer()


def render_any(x) -> str:
    return _PLAIN.any(x)


def render_statement(s: Statement, aliases: Optional[Dict[str, Term]] = None) -> str:
    return Renderer(aliases).statement(s) if aliases else _PLAIN.statement(s)


def render_term(t: Term, aliases: Optional[Dict[str, Term]] = None) -> str:
    return Renderer(aliases).term(t) if aliases else _PLAIN.term(t)


def render_spec(spec) -> str:
    """Serialize a spec back to ``.gny`` text (parse(render(spec)) == spec)."""
    out = [f"protocol {spec.name}"]
    if spec.commutative_asym:
        out.append("flags commutative-asym")
    out.append("principals " + ", ".join(spec.principals))
    out += ["", "declare"]
    run_kind, run = None, []

    def flush():
        if run:
            out.append(f"  {KIND_NAMES[run_kind]} " + ", ".join(run))

    for a in spec.atoms:
        if a.label in spec.display:
            flush()
            run_kind, run = None, []
            out.append(f'  {KIND_NAMES[a.kind]} {a.label} "{spec.display[a.label]}"')
            continue
        if a.kind != run_kind:
            flush()
            run_kind, run = a.kind, []
        run.append(a.label)
    flush()
    if spec.keypairs:
        out.append("  keypair " + ", ".join(spec.keypairs))
    earlier: Dict[str, Term] = {}
    for name, t in spec.derived.items():
        out.append(f"  derive {name} = {Renderer(earlier).term(t)}")
        earlier[name] = t
    out += ["", "messages"]
    for m in spec.messages:
        r = Renderer(earlier)
        out.append(f"  {m.label}: {m.sender} -> {m.receiver} : {r.term(m.term)}")
        earlier.setdefault(m.label, m.term)
    r = Renderer(spec.aliases())
    out += ["", "assume"]
    for pre in spec.preconditions:
        out.append(f"  [{pre.label}] {r.statement(pre.statement)}")
    for rule in spec.rules:
        prem = ", ".join(r.statement(s) for s in rule.steps)
        concl = ", ".join(r.statement(s) for s in rule.conclusions)
        out.append(f"  [{rule.name}] {prem} => {concl}")
    out += ["", "goals"]
    for g in spec.goals:
        out.append(f"  [{g.label}] {r.statement(g.statement)}")
    return "\n".join(out) + "\n"


# -- trace export ----------------------------------------------------------------

TRACE_FORMAT = "gny-trace"


def export_trace(trace, fmt: str = "structured", aliases=None, title: str = "") -> str:
    """Serialize a proof trace.

    ``structured`` is a JSON document whose nodes carry the stable keys
    ``statement``, ``rule``, ``premises`` and ``label``; ``derivation-text``
    is a numbered, rule-annotated listing.  Both are deterministic.
    """
    r = Renderer(aliases)
    if fmt == "structured":
        nodes = []
        for i, n in enumerate(trace.nodes):
            j = n.justification
            nodes.append({
                "id": i,
                "statement": r.statement(n.statement),
                "rule": j.rule,
                "lift": j.lift,
                "label": j.label,
                "premises": list(n.premises),
            })
        doc = {"format": TRACE_FORMAT, "version": 1, "protocol": title, "nodes": nodes}
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    if fmt in ("derivation-text", "text"):
        from .engine import describe

        lines = [f"# derivation {title}".rstrip() + f" ({len(trace.nodes)} steps)"]
        for i, n in enumerate(trace.nodes, start=1):
            why = describe(n.justification)
            if n.premises:
                why += " from " + ", ".join(f"({p + 1})" for p in n.premises)
            lines.append(f"({i}) {r.statement(n.statement)}    {why}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown trace format {fmt!r}")


def load_trace(text: str, ctx: Context):
    """Read a structured trace export back into a :class:`ProofTrace`."""
    from .engine import ProofTrace, TraceNode
    from .rules import Justification

    doc = json.loads(text)
    if doc.get("format") != TRACE_FORMAT:
        raise GNYError("not a structured trace export")
    stmts = []
    nodes = []
    for n in doc["nodes"]:
        s = parse_statement(n["statement"], ctx)
        premises = tuple(n["premises"])
        just = Justification(n["rule"], tuple(stmts[p] for p in premises), n.get("lift", 0), n.get("label"))
        stmts.append(s)
        nodes.append(TraceNode(s, just, premises))
    return ProofTrace(tuple(nodes))
