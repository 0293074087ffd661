from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as hs

import oracle
from conftest import completed, st, tm
from gnylogic import fixture
from gnylogic.dsl import Context, parse_statement, parse_term, render_any
from gnylogic.engine import (
    AUTHOR, PRECONDITION, RECEIPT, EngineConfig, KnowledgeBase, build_universe, explain,
    holds_goal, saturate,
)
from gnylogic.errors import IterationCapExceeded, NotInTrace
from gnylogic.formulae import Universe, normalize, terms_in
from gnylogic.protocol import ProtocolSpec, init_run, step
from gnylogic.rules import Justification, SetView, catalog, instantiate, lift

SPECIAL = {PRECONDITION, RECEIPT, AUTHOR}


def _ctx(spec):
    return Context.from_spec(spec)


def _kb(statements):
    kb = KnowledgeBase()
    for s in statements:
        kb.add(normalize(s), Justification(PRECONDITION, label="t"))
    return kb


def _universe(statements, extra=()):
    terms = list(extra)
    for s in statements:
        terms.extend(terms_in(s))
    return Universe(terms)


def _run_to(name, n, depth=3):
    spec = fixture(name)
    run = init_run(spec, EngineConfig(max_belief_depth=depth))
    for _ in range(n):
        run = step(run)
    return run


# -- build_universe -------------------------------------------------------------------


def test_tls_universe_has_session_key_and_finished_hash(tls):
    uni = build_universe(tls)
    ctx = _ctx(tls)
    assert parse_term("K_AB", ctx) in uni
    assert parse_term("H(Y5)", ctx) in uni
    assert parse_term("H(K_AB, AB_5, M1, M2, M3, M4)", ctx) in uni


def test_empty_spec_has_empty_universe():
    spec = ProtocolSpec(name="empty", principals=("A",))
    assert len(build_universe(spec).terms) == 0


def test_kerberos_universe_has_successor(kerberos):
    assert parse_term("succ(T_A)", _ctx(kerberos)) in build_universe(kerberos)


def test_universe_contains_both_key_halves(tls):
    uni = build_universe(tls)
    ctx = _ctx(tls)
    assert parse_term("priv(K_B)", ctx) in uni and parse_term("pub(K_C)", ctx) in uni


# -- saturate ---------------------------------------------------------------------------


def test_server_nonces_become_held_after_m2():
    run = _run_to("tls-named-server", 2)
    ctx = _ctx(run.spec)
    for text in ["A holds N_B", "A holds T_B", "A holds N_A", "A holds T_A"]:
        assert parse_statement(text, ctx) in run.kb


def test_saturating_nothing_gives_nothing():
    kb, trace = saturate(KnowledgeBase(), catalog(), Universe([]))
    assert len(kb) == 0 and len(trace) == 0


def test_saturate_is_idempotent():
    run = _run_to("kerberos", 2, depth=2)
    again, _ = saturate(run.kb, run.catalog, run.universe, run.config)
    assert set(again) == set(run.kb)


def test_saturate_leaves_input_untouched():
    kb = _kb([st("A sees *(N, M)")])
    out, _ = saturate(kb, catalog(), _universe(kb))
    assert len(kb) == 1 and len(out) > 1


def test_iteration_cap():
    kb = _kb([st("A sees *(N, M, T)"), st("A believes fresh(N)")])
    with pytest.raises(IterationCapExceeded):
        saturate(kb, catalog(), _universe(kb), EngineConfig(max_iterations=1))


def test_depth_cap_is_respected():
    run = _run_to("tls-named-server", 4, depth=2)
    from gnylogic.formulae import belief_depth
    assert max(belief_depth(s) for s in run.kb) <= 2


def test_config_rejects_zero_depth():
    with pytest.raises(ValueError):
        EngineConfig(max_belief_depth=0)


POOL = ["A sees *(N, M)", "A sees *enc{N}K", "A holds K", "A believes fresh(N)",
        "A believes recog(N)", "A believes A shares K with B", "B believes A said (N, M)",
        "A sees H(N, M)", "B holds (N, T)", "A believes fresh(M)"]
EXTRA = ["(N, M)", "enc{M}K", "H(N)", "(N, T)"]


@settings(max_examples=25, deadline=None)
@given(hs.sets(hs.sampled_from(POOL), max_size=5), hs.sets(hs.sampled_from(POOL), max_size=3))
def test_saturate_is_monotone(small, more):
    a = [st(t) for t in small]
    b = a + [st(t) for t in more]
    uni = _universe(b, [tm(t) for t in EXTRA])
    cfg = EngineConfig(max_belief_depth=2)
    ka, _ = saturate(_kb(a), catalog(), uni, cfg)
    kb, _ = saturate(_kb(b), catalog(), uni, cfg)
    assert set(ka) <= set(kb)


@settings(max_examples=25, deadline=None)
@given(hs.sets(hs.sampled_from(POOL), max_size=6))
def test_saturate_matches_brute_force_on_small_sets(texts):
    stmts = [st(t) for t in texts]
    uni = _universe(stmts, [tm(t) for t in EXTRA])
    kb, _ = saturate(_kb(stmts), catalog(), uni, EngineConfig(max_belief_depth=2))
    assert set(kb) == oracle.closure(stmts, uni.terms, oracle.all_rules(2), 2)


# -- oracle equivalence on the fixtures -------------------------------------------------


@pytest.mark.parametrize("name,n", [("kerberos", 4), ("tls-named-server", 4)])
def test_engine_agrees_with_brute_force_closure(name, n):
    from gnylogic.formulae import Holds, Sees, Starred

    base = fixture(name)
    spec = replace(base, messages=base.messages[:n])
    run = init_run(spec, EngineConfig(max_belief_depth=2))
    start = [p.statement for p in spec.preconditions]
    authored = set()
    for m in spec.messages:
        run = step(run)
        start.append(Holds(m.sender, m.term))
        own = (m.receiver, m.term) in authored
        start.append(Sees(m.receiver, m.term if own else Starred(m.term)))
        authored.add((m.sender, m.term))
    uni = build_universe(spec)
    assert len(uni.terms) <= 60
    ref = oracle.closure(start, uni.terms, oracle.all_rules(2, spec.rules, spec.commutative_asym), 2)
    assert set(run.kb) == ref


# -- provenance and trace soundness ----------------------------------------------------


@pytest.mark.parametrize("name", ["tls-named-server", "kerberos"])
def test_provenance_is_complete(name):
    run, _ = completed(name)
    kb = run.kb
    for s in kb:
        j = kb.provenance(s)
        if j.rule in SPECIAL:
            assert not j.premises
        for p in j.premises:
            assert p in kb


@pytest.mark.parametrize("name", ["tls-named-server", "kerberos", "tls-mutual"])
def test_trace_is_topological(name):
    run, _ = completed(name)
    for i, node in enumerate(run.trace):
        assert all(p < i for p in node.premises)


@pytest.mark.parametrize("name", ["tls-named-server", "kerberos", "tls-anonymous-server"])
def test_trace_replays(name):
    run, _ = completed(name)
    cat = run.catalog
    for node in run.trace:
        j = node.justification
        if j.rule in SPECIAL:
            continue
        rule = cat.lookup(j.rule)
        if j.lift:
            rule = lift(rule, j.lift)
        out = {c for c, _ in instantiate(rule, SetView(list(j.premises)), run.universe)}
        assert node.statement in out, (j.display, render_any(node.statement))


def test_trace_is_deterministic():
    a = _run_to("kerberos", 4).trace
    b = _run_to("kerberos", 4).trace
    assert a == b


# -- holds_goal and explain -------------------------------------------------------------


def test_goal_proof_ends_at_goal():
    run, _ = completed("tls-named-server")
    goal = parse_statement("B believes A believes A shares K_AB with B", _ctx(run.spec))
    proof = holds_goal(run.kb, goal)
    assert proof is not None
    assert proof.nodes[-1].statement == goal
    assert proof.nodes[-1].justification.rule == "J2"


def test_goal_never_mentioned_is_not_found():
    run, _ = completed("tls-named-server")
    assert holds_goal(run.kb, parse_statement("C holds N_A", _ctx(run.spec))) is None


def test_kerberos_key_confirmation_goal():
    run, _ = completed("kerberos")
    goal = parse_statement("A believes B believes A shares K_AB with B", _ctx(run.spec))
    assert holds_goal(run.kb, goal) is not None


def test_slice_is_minimal_closure_of_premises():
    run, _ = completed("kerberos")
    goal = run.spec.goals[0].statement
    proof = holds_goal(run.kb, goal)
    used = {len(proof) - 1}
    for i in range(len(proof) - 1, -1, -1):
        if i in used:
            used.update(proof.nodes[i].premises)
    assert used == set(range(len(proof)))


def test_explain_server_key_cites_j1_then_i4():
    run, _ = completed("tls-named-server")
    goal = parse_statement("A believes pubkey(K_B) of B", _ctx(run.spec))
    text = explain(run.trace, goal, lambda s: render_any(s))
    lines = text.splitlines()
    assert lines[0].startswith("A believes pubkey(K_B) of B") and "By (J1)" in lines[0]
    assert "By (I4)" in text
    assert "assumed [c:5]" in text


def test_explain_precondition_is_single_node():
    run, _ = completed("tls-named-server")
    text = explain(run.trace, parse_statement("A holds id(C)", _ctx(run.spec)))
    assert text.strip().splitlines() == ["A holds id(C)    assumed [c:0:C]"]


def test_explain_secret_cites_decryption_of_m4():
    run, _ = completed("tls-named-server")
    text = explain(run.trace, parse_statement("B holds N'_A", _ctx(run.spec)))
    assert "By (P1)" in text and "By (T4)" in text and "received M4" in text


def test_explain_missing_statement():
    run, _ = completed("kerberos")
    with pytest.raises(NotInTrace):
        explain(run.trace, parse_statement("B holds K_AS", _ctx(run.spec)))
