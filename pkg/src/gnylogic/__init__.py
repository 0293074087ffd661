"""Mechanical GNY belief-logic proofs for authentication protocols."""
from .errors import (
    AttackError, GNYError, IterationCapExceeded, NotInTrace, ParseFailure,
    RunComplete, SpecError, UnboundMetaVar,
)
from .formulae import normalize
from .rules import RULE_NAMES, catalog, instantiate
from .engine import EngineConfig, KnowledgeBase, ProofTrace, explain, holds_goal, saturate
from .protocol import (
    ATTACKS, FIXTURE_NAMES, ProtocolSpec, apply_attack, check_goals, fixture,
    fixtures, init_run, run_to_completion, step, verify,
)
from .dsl import export_trace, parse_spec, parse_statement, parse_term, render_spec, render_statement

__all__ = [
    "ATTACKS", "AttackError", "EngineConfig", "FIXTURE_NAMES", "GNYError",
    "IterationCapExceeded", "KnowledgeBase", "NotInTrace", "ParseFailure",
    "ProofTrace", "ProtocolSpec", "RULE_NAMES", "RunComplete", "SpecError",
    "UnboundMetaVar", "apply_attack", "catalog", "check_goals", "explain",
    "export_trace", "fixture", "fixtures", "holds_goal", "init_run", "instantiate",
    "normalize", "parse_spec", "parse_statement", "parse_term", "render_spec",
    "render_statement", "run_to_completion", "saturate", "step", "verify",
]
