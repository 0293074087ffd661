"""Protocol specifications, runs, attack transforms and built-in fixtures.

A run loads the preconditions, then for each message grants the sender
possession of what it sends, records the receiver seeing it (marked as
not originated here), and saturates.  Goals are checked on the final
knowledge base.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .engine import (
    AUTHOR, PRECONDITION, RECEIPT, EngineConfig, KnowledgeBase, ProofTrace,
    build_universe, holds_goal, saturate,
)
from .errors import AttackError, RunComplete, SpecError
from .formulae import (
    AsymEnc, Atom, Concat, Holds, Identity, PrivateKey, PublicKey, Sees,
    Starred, Statement, SymEnc, Term, Universe, children, is_ground, normalize,
    subterms, terms_in,
)
from .rules import Justification, Rule, RuleCatalog, catalog


@dataclass(frozen=True)
class Message:
    index: int
    label: str
    sender: str
    receiver: str
    term: Term


@dataclass(frozen=True)
class Precondition:
    statement: Statement
    label: str


@dataclass(frozen=True)
class Goal:
    statement: Statement
    label: str


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    principals: Tuple[str, ...]
    atoms: Tuple[Atom, ...] = ()
    keypairs: Tuple[str, ...] = ()
    derived: Dict[str, Term] = field(default_factory=dict)
    preconditions: Tuple[Precondition, ...] = ()
    rules: Tuple[Rule, ...] = ()
    messages: Tuple[Message, ...] = ()
    goals: Tuple[Goal, ...] = ()
    commutative_asym: bool = False
    display: Dict[str, str] = field(default_factory=dict)

    def __hash__(self):
        return hash((self.name, self.messages, self.preconditions, self.goals))

    def message(self, ref: Union[int, str]) -> Message:
        for m in self.messages:
            if m.index == ref or m.label == ref:
                return m
        raise AttackError(f"no message {ref!r} in {self.name}")

    def aliases(self) -> Dict[str, Term]:
        """Names usable in place of terms: derived definitions, then message labels."""
        out = dict(self.derived)
        for m in self.messages:
            out.setdefault(m.label, m.term)
        return out

    def validate(self) -> "ProtocolSpec":
        principals = set(self.principals)
        if len(principals) != len(self.principals):
            raise SpecError("duplicate principal name")
        atoms = {a.label for a in self.atoms}
        keys = set(self.keypairs)

        def check_term(t, label):
            for sub in subterms(t):
                if isinstance(sub, Atom) and sub.label not in atoms:
                    raise SpecError(f"undeclared atom {sub.label}", label)
                if isinstance(sub, (PublicKey, PrivateKey)) and isinstance(sub.label, str) \
                        and sub.label not in keys:
                    raise SpecError(f"undeclared key pair {sub.label}", label)
                if isinstance(sub, Identity) and isinstance(sub.principal, str) \
                        and sub.principal not in principals:
                    raise SpecError(f"undeclared principal {sub.principal}", label)

        def check_statement(s, label):
            for p in _principals_in(s):
                if p not in principals:
                    raise SpecError(f"undeclared principal {p}", label)
            for t in terms_in(s):
                check_term(t, label)

        for i, m in enumerate(self.messages):
            if m.index != i:
                raise SpecError("message indices must be consecutive from 0", m.label)
            for p in (m.sender, m.receiver):
                if p not in principals:
                    raise SpecError(f"undeclared principal {p}", m.label)
            if not is_ground(m.term):
                raise SpecError("message terms must not contain schema variables", m.label)
            check_term(m.term, m.label)
        labels = set()
        for pre in self.preconditions:
            if pre.label in labels:
                raise SpecError("duplicate precondition label", pre.label)
            labels.add(pre.label)
            check_statement(pre.statement, pre.label)
        for r in self.rules:
            if r.name in labels:
                raise SpecError("duplicate precondition label", r.name)
            labels.add(r.name)
            for st in r.steps + r.conclusions:
                check_statement(st, r.name)
        for g in self.goals:
            if not is_ground(g.statement):
                raise SpecError("goals must be ground", g.label)
            check_statement(g.statement, g.label)
        return self


def _principals_in(s) -> List[str]:
    from .formulae import (
        Believes, Controls, Holds, PublicKeyOf, Said, Sees, SharedSecret,
    )

    out = []
    stack = [s]
    while stack:
        x = stack.pop()
        if isinstance(x, (Sees, Holds, Said, Believes, Controls)):
            out.append(x.p)
        elif isinstance(x, SharedSecret):
            out += [x.p, x.q]
        elif isinstance(x, PublicKeyOf):
            out.append(x.q)
        if isinstance(x, Statement):
            stack.extend(c for c in children(x) if isinstance(c, Statement))
    return [p for p in out if isinstance(p, str)]


# -- runs ------------------------------------------------------------------------


@dataclass(frozen=True)
class RunState:
    spec: ProtocolSpec
    kb: KnowledgeBase
    cursor: int
    universe: Universe
    catalog: RuleCatalog
    config: EngineConfig
    authored: frozenset = frozenset()

    @property
    def complete(self) -> bool:
        return self.cursor >= len(self.spec.messages)

    @property
    def trace(self) -> ProofTrace:
        return self.kb.trace()


def _config_for(spec: ProtocolSpec, config: Optional[EngineConfig]) -> EngineConfig:
    config = config or EngineConfig()
    return replace(config, commutative_asym=config.commutative_asym and spec.commutative_asym)


def init_run(spec: ProtocolSpec, config: Optional[EngineConfig] = None) -> RunState:
    """Load preconditions and saturate once; no message has been delivered yet."""
    spec.validate()
    config = _config_for(spec, config)
    cat = catalog().configured(extra=spec.rules)
    universe = build_universe(spec)
    kb = KnowledgeBase()
    for pre in spec.preconditions:
        kb.add(pre.statement, Justification(PRECONDITION, label=pre.label))
    kb, _ = saturate(kb, cat, universe, config)
    return RunState(spec, kb, 0, universe, cat, config)


def step(run: RunState) -> RunState:
    """Deliver the next message and saturate.  Returns a new state."""
    if run.complete:
        raise RunComplete(f"{run.spec.name}: all {len(run.spec.messages)} messages delivered")
    msg = run.spec.messages[run.cursor]
    kb = run.kb.copy()
    kb.add(Holds(msg.sender, msg.term), Justification(AUTHOR, label=msg.label))
    # a principal recognizes and ignores its own messages: no star
    own = (msg.receiver, msg.term) in run.authored
    seen = msg.term if own else Starred(msg.term)
    kb.add(Sees(msg.receiver, seen), Justification(RECEIPT, label=msg.label))
    kb, _ = saturate(kb, run.catalog, run.universe, run.config)
    return replace(run, kb=kb, cursor=run.cursor + 1,
                   authored=run.authored | {(msg.sender, msg.term)})


def run_to_completion(run: RunState) -> RunState:
    while not run.complete:
        run = step(run)
    return run


@dataclass(frozen=True)
class GoalResult:
    label: str
    statement: Statement
    proved: bool
    proof: Optional[ProofTrace]


@dataclass(frozen=True)
class GoalReport:
    protocol: str
    results: Tuple[GoalResult, ...]

    @property
    def all_proved(self) -> bool:
        return all(r.proved for r in self.results)

    def __iter__(self):
        return iter(self.results)

    def __len__(self):
        return len(self.results)


def check_goals(run: RunState) -> GoalReport:
    if not run.complete:
        raise RunComplete("check_goals needs a completed run")
    results = []
    for g in run.spec.goals:
        proof = holds_goal(run.kb, g.statement)
        results.append(GoalResult(g.label, normalize(g.statement), proof is not None, proof))
    return GoalReport(run.spec.name, tuple(results))


def verify(spec: ProtocolSpec, config: Optional[EngineConfig] = None) -> Tuple[RunState, GoalReport]:
    run = run_to_completion(init_run(spec, config))
    return run, check_goals(run)


# -- attacks ---------------------------------------------------------------------


@dataclass(frozen=True)
class ReplaceMessage:
    message: Union[int, str]
    term: Term


@dataclass(frozen=True)
class DropMessage:
    message: Union[int, str]


@dataclass(frozen=True)
class RemovePrecondition:
    label: str


@dataclass(frozen=True)
class AddPrincipal:
    name: str
    granted: Tuple[Term, ...] = ()


AttackTransform = Union[ReplaceMessage, DropMessage, RemovePrecondition, AddPrincipal]


def apply_attack(spec: ProtocolSpec, transforms: Sequence[AttackTransform]) -> ProtocolSpec:
    """Return a modified spec; symbols introduced by the attacker are declared."""
    for tr in transforms:
        if isinstance(tr, ReplaceMessage):
            old = spec.message(tr.message)
            msgs = tuple(replace(m, term=normalize(tr.term)) if m is old else m for m in spec.messages)
            spec = _declare_terms(replace(spec, messages=msgs), [tr.term])
        elif isinstance(tr, DropMessage):
            old = spec.message(tr.message)
            kept = [m for m in spec.messages if m is not old]
            spec = replace(spec, messages=tuple(replace(m, index=i) for i, m in enumerate(kept)))
        elif isinstance(tr, RemovePrecondition):
            pres = tuple(p for p in spec.preconditions if p.label != tr.label)
            rules = tuple(r for r in spec.rules if r.name != tr.label)
            if len(pres) == len(spec.preconditions) and len(rules) == len(spec.rules):
                raise AttackError(f"no precondition labelled {tr.label!r} in {spec.name}")
            spec = replace(spec, preconditions=pres, rules=rules)
        elif isinstance(tr, AddPrincipal):
            if tr.name in spec.principals:
                raise AttackError(f"principal {tr.name} already exists")
            pres = spec.preconditions + tuple(
                Precondition(Holds(tr.name, normalize(t)), f"attacker:{tr.name}:{i}")
                for i, t in enumerate(tr.granted))
            spec = replace(spec, principals=spec.principals + (tr.name,), preconditions=pres)
            spec = _declare_terms(spec, tr.granted)
        else:
            raise AttackError(f"unknown transform {tr!r}")
    return spec.validate()


def _declare_terms(spec: ProtocolSpec, terms) -> ProtocolSpec:
    atoms = list(spec.atoms)
    known = {a.label for a in atoms}
    keys = list(spec.keypairs)
    principals = list(spec.principals)
    for t in terms:
        for sub in subterms(t):
            if isinstance(sub, Atom) and sub.label not in known:
                atoms.append(sub)
                known.add(sub.label)
            elif isinstance(sub, (PublicKey, PrivateKey)) and sub.label not in keys:
                keys.append(sub.label)
            elif isinstance(sub, Identity) and sub.principal not in principals:
                principals.append(sub.principal)
    return replace(spec, atoms=tuple(atoms), keypairs=tuple(keys), principals=tuple(principals))


def cert_substitution(spec: ProtocolSpec) -> List[AttackTransform]:
    """Man in the middle M swaps the server certificate for one it signed
    itself (naming a service D), so the client's pre-master secret goes out
    under M's key."""
    cert = spec.message("M3")
    premaster = spec.message("M4")
    if not isinstance(cert.term, AsymEnc) or not isinstance(premaster.term, AsymEnc):
        raise AttackError(f"{spec.name} has no certificate exchange to attack")
    bogus = AsymEnc(Concat((PublicKey("K_M"), Identity("D"), Identity("M"))), PrivateKey("K_M"))
    return [
        AddPrincipal("M", (PrivateKey("K_M"), PublicKey("K_M"))),
        AddPrincipal("D"),
        ReplaceMessage("M3", bogus),
        ReplaceMessage("M4", AsymEnc(premaster.term.body, PublicKey("K_M"))),
    ]


ATTACKS = {"cert-substitution": cert_substitution}


# -- fixtures --------------------------------------------------------------------

FIXTURE_NAMES = ("tls-named-server", "tls-anonymous-server", "tls-mutual", "kerberos")


def fixture_text(name: str) -> str:
    if name not in FIXTURE_NAMES:
        raise KeyError(f"no built-in fixture {name!r}")
    return resources.files("gnylogic").joinpath("fixtures", f"{name}.gny").read_text("utf-8")


_FIXTURE_CACHE: Dict[str, ProtocolSpec] = {}


def fixture(name: str) -> ProtocolSpec:
    if name not in _FIXTURE_CACHE:
        from .dsl import parse_spec

        _FIXTURE_CACHE[name] = parse_spec(fixture_text(name))
    return _FIXTURE_CACHE[name]


def fixtures() -> List[ProtocolSpec]:
    return [fixture(n) for n in FIXTURE_NAMES]
