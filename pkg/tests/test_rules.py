import pytest
from hypothesis import given, settings, strategies as hs

from conftest import st, tm
from gnylogic.formulae import Starred, Universe, normalize, subject_term, terms_in
from gnylogic.rules import LOCALIZE, RULE_NAMES, SetView, catalog, instantiate, lift

# name -> (premise statements, extra universe terms, expected conclusion,
#          near-miss premise statements under which the conclusion is not drawn)
CASES = {
    "T1": (["A sees *N"], [], "A sees N", ["A sees N"]),
    "T2": (["A sees (N, M)"], [], "A sees M", ["A sees H(N, M)"]),
    "T3": (["A sees enc{N}K", "A holds K"], [], "A sees N", ["A sees enc{N}K", "A holds M"]),
    "T4": (["A sees enc{N}pub(KP)", "A holds priv(KP)"], [], "A sees N",
           ["A sees enc{N}pub(KP)", "A holds priv(KQ)"]),
    "T5": (["A sees F(N, M)", "A holds N"], [], "A sees M", ["A sees F(N, M)", "A holds M"]),
    "T6": (["A sees enc{N}priv(KP)", "A holds pub(KP)"], [], "A sees N",
           ["A sees enc{N}priv(KP)", "A holds priv(KP)"]),
    "P1": (["A sees N"], [], "A holds N", ["A said N"]),
    "P2": (["A holds N", "A holds M"], ["(N, M)"], "A holds (N, M)", ["A holds N", "B holds M"]),
    "P3": (["A holds (N, M)"], [], "A holds M", ["A sees H(N, M)"]),
    "P4": (["A holds N"], ["H(N)"], "A holds H(N)", ["A sees N"]),
    "P5": (["A holds F(N, M)", "A holds N"], [], "A holds M", ["A holds F(N, M)", "A holds T"]),
    "P6": (["A holds K", "A holds N"], ["enc{N}K"], "A holds enc{N}K", ["A holds N"]),
    "P7": (["A holds pub(KP)", "A holds N"], ["enc{N}pub(KP)"], "A holds enc{N}pub(KP)",
           ["A holds priv(KP)", "A holds N"]),
    "P8": (["A holds priv(KP)", "A holds N"], ["enc{N}priv(KP)"], "A holds enc{N}priv(KP)",
           ["A holds pub(KP)", "A holds N"]),
    "F1": (["A believes fresh(N)"], ["(N, M)"], "A believes fresh((N, M))", ["A believes recog(N)"]),
    "F2": (["A believes fresh(N)", "A holds K"], ["enc{N}K"], "A believes fresh(enc{N}K)",
           ["A believes fresh(N)", "B holds K"]),
    "F3": (["A believes fresh(N)", "A holds pub(KP)"], ["enc{N}pub(KP)"],
           "A believes fresh(enc{N}pub(KP))", ["A believes fresh(N)", "A holds pub(KQ)"]),
    "F4": (["A believes fresh(N)", "A holds priv(KP)"], ["enc{N}priv(KP)"],
           "A believes fresh(enc{N}priv(KP))", ["A believes fresh(M)", "A holds priv(KP)"]),
    "F5": (["A believes fresh(pub(KP))"], ["priv(KP)"], "A believes fresh(priv(KP))",
           ["A believes recog(pub(KP))"]),
    "F6": (["A believes fresh(priv(KP))"], ["pub(KP)"], "A believes fresh(pub(KP))",
           ["B believes recog(priv(KP))"]),
    "F7": (["A believes recog(N)", "A believes fresh(K)", "A holds K"], ["enc{N}K"],
           "A believes fresh(enc{N}K)", ["A believes fresh(K)", "A holds K"]),
    "F8": (["A believes recog(N)", "A believes fresh(pub(KP))", "A holds pub(KP)"],
           ["enc{N}pub(KP)"], "A believes fresh(enc{N}pub(KP))",
           ["A believes recog(N)", "A believes fresh(pub(KP))"]),
    "F9": (["A believes recog(N)", "A believes fresh(priv(KP))", "A holds priv(KP)"],
           ["enc{N}priv(KP)"], "A believes fresh(enc{N}priv(KP))",
           ["A believes recog(N)", "A believes fresh(pub(KP))", "A holds priv(KP)"]),
    "F10": (["A believes fresh(N)", "A holds N"], ["H(N)"], "A believes fresh(H(N))",
            ["A believes fresh(N)", "A sees N"]),
    "F11": (["A believes fresh(H(N))", "A holds H(N)"], [], "A believes fresh(N)",
            ["A believes fresh(H(N))", "B holds H(N)"]),
    "R1": (["A believes recog(N)"], ["(N, M)"], "A believes recog((N, M))", ["A believes fresh(N)"]),
    "R2": (["A believes recog(N)", "A holds K"], ["enc{N}K"], "A believes recog(enc{N}K)",
           ["A believes recog(N)"]),
    "R3": (["A believes recog(N)", "A holds pub(KP)"], ["enc{N}pub(KP)"],
           "A believes recog(enc{N}pub(KP))", ["A believes recog(M)", "A holds pub(KP)"]),
    "R4": (["A believes recog(N)", "A holds priv(KP)"], ["enc{N}priv(KP)"],
           "A believes recog(enc{N}priv(KP))", ["A believes recog(N)", "A holds pub(KP)"]),
    "R5": (["A believes recog(N)", "A holds N"], ["H(N)"], "A believes recog(H(N))",
           ["A believes recog(N)"]),
    "R6": (["A holds H(K)"], ["N"], "A believes recog(N)", ["A holds K"]),
    "I1": (["A sees *enc{N}K", "A holds K", "A believes A shares K with B",
            "A believes recog(N)", "A believes fresh(N)"], [], "A believes B said N",
           ["A sees enc{N}K", "A holds K", "A believes A shares K with B",
            "A believes recog(N)", "A believes fresh(N)"]),
    "I2": (["A sees *enc{N}pub(KP)", "A holds priv(KP)", "A holds N", "A believes pubkey(KP) of A",
            "A believes A shares N with B", "A believes recog(N)", "A believes fresh(N)"], [],
           "A believes B said N",
           ["A sees *enc{N}pub(KP)", "A holds priv(KP)", "A holds N", "A believes pubkey(KP) of A",
            "A believes A shares M with B", "A believes recog(N)", "A believes fresh(N)"]),
    "I3": (["A sees *H(N, M)", "A holds (N, M)", "A believes A shares M with B",
            "A believes fresh(M)"], [], "A believes B said (N, M)",
           ["A sees *H(N, M)", "A holds (N, M)", "A believes A shares M with B"]),
    "I4": (["A sees enc{N}priv(KP)", "A holds pub(KP)", "A believes pubkey(KP) of B",
            "A believes recog(N)"], [], "A believes B said N",
           ["A sees enc{N}priv(KP)", "A holds pub(KP)", "A believes pubkey(KP) of C",
            "A believes fresh(N)"]),
    "I5": (["A sees enc{N}priv(KP)", "A holds pub(KP)", "A believes pubkey(KP) of B",
            "A believes recog(N)", "A believes fresh(N)"], [], "A believes B holds (priv(KP), N)",
           ["A sees enc{N}priv(KP)", "A holds pub(KP)", "A believes pubkey(KP) of B",
            "A believes recog(N)"]),
    "I6": (["A believes B said N", "A believes fresh(N)"], [], "A believes B holds N",
           ["A believes B said N", "A believes fresh(M)"]),
    "I7": (["A believes B said (N, M)"], [], "A believes B said M", ["A believes B holds (N, M)"]),
    "J1": (["A believes B controls fresh(N)", "A believes B believes fresh(N)"], [],
           "A believes fresh(N)", ["A believes B controls fresh(M)", "A believes B believes fresh(N)"]),
    "J2": (["A believes B said N", "A believes (N means fresh(M))", "A believes B controls B believes ?C",
            "A believes fresh(N)"], [], "A believes B believes fresh(M)",
           ["A believes B said N", "A believes (N means fresh(M))",
            "A believes B controls B believes ?C", "A believes fresh(M)"]),
    "J3": (["A believes B believes B believes fresh(N)", "A believes B controls B believes fresh(N)"], [],
           "A believes B believes fresh(N)", ["A believes B believes B believes fresh(N)"]),
}


def _universe(statements, extra):
    terms = [tm(t) for t in extra]
    for s in statements:
        terms.extend(terms_in(s))
    return Universe(terms)


def _conclusions(name, texts, extra):
    stmts = [st(t) for t in texts]
    return {c for c, _ in instantiate(catalog().lookup(name), stmts, _universe(stmts, extra))}


def test_catalog_has_every_rule():
    names = catalog().names()
    assert names == list(RULE_NAMES)
    assert len(names) == 41
    assert set(CASES) == set(names)


@pytest.mark.parametrize("name", RULE_NAMES)
def test_rule_positive(name):
    premises, extra, expected, _ = CASES[name]
    assert st(expected) in _conclusions(name, premises, extra)


@pytest.mark.parametrize("name", RULE_NAMES)
def test_rule_near_miss(name):
    premises, extra, expected, perturbed = CASES[name]
    assert st(expected) not in _conclusions(name, perturbed, extra)


def test_lookup_shapes():
    cat = catalog()
    t3 = cat.lookup("T3")
    assert (len(t3.premises), len(t3.conclusions)) == (2, 1)
    f7 = cat.lookup("F7")
    assert (len(f7.premises), len(f7.conclusions)) == (3, 2)
    with pytest.raises(KeyError):
        cat.lookup("T9")


def test_catalog_is_deterministic():
    assert [r.name for r in catalog()] == [r.name for r in catalog()]
    assert catalog().rules == catalog().rules


def test_optional_rules_are_gated():
    cat = catalog()
    names = [r.name for r in cat.active(1)]
    assert "R6" not in names and "T6" in names
    assert "R6" in [r.name for r in catalog(r6_enabled=True).active(1)]
    assert "T6" not in [r.name for r in catalog(commutative_asym=False).active(1)]


def test_t2_reads_every_component():
    out = _conclusions("T2", ["A sees (N, M, T)"], [])
    assert {st("A sees N"), st("A sees M"), st("A sees T")} <= out


def test_star_survives_decryption():
    out = _conclusions("T3", ["A sees *enc{N}K", "A holds K"], [])
    assert st("A sees *N") in out


def test_p2_respects_universe_bound():
    assert _conclusions("P2", ["B holds N", "B holds M"], []) == set()


def test_j1_adopts_authority_key_binding():
    stmts = [st("A believes C controls pubkey(KP) of B"), st("A believes C believes pubkey(KP) of B")]
    out = instantiate(catalog().lookup("J1"), stmts, Universe([]))
    assert [c for c, _ in out] == [st("A believes pubkey(KP) of B")]
    assert set(out[0][1].premises) == set(stmts)


@pytest.mark.parametrize("name", ["I1", "I2", "I3"])
def test_interpretation_needs_not_originated_here(name):
    premises, extra, expected, _ = CASES[name]
    unstarred = [p.replace("sees *", "sees ") for p in premises]
    assert st(expected) not in _conclusions(name, unstarred, extra)


@pytest.mark.parametrize("name", ["I4", "I5"])
def test_signature_rules_accept_either_star(name):
    premises, extra, expected, _ = CASES[name]
    starred = [p.replace("sees enc", "sees *enc") for p in premises]
    assert st(expected) in _conclusions(name, starred, extra)


def test_fresh_any_accepts_key_freshness():
    premises = ["A sees *enc{N}K", "A holds K", "A believes A shares K with B",
                "A believes recog(N)", "A believes fresh(K)"]
    assert st("A believes B said N") in _conclusions("I1", premises, [])


def test_localize_wraps_rule():
    lifted = lift(catalog().lookup("P1"), 1)
    out = {c for c, _ in instantiate(lifted, [st("B believes A sees N")], Universe([]))}
    assert out == {st("B believes A holds N")}
    assert lifted.lift == 1 and LOCALIZE == "Localize"


def test_schema_premise_matches_instances():
    view = SetView([st("A believes C controls pubkey(?K) of ?P"), st("A believes C believes pubkey(KP) of B")])
    out = {c for c, _ in instantiate(catalog().lookup("J1"), view, Universe([]))}
    assert out == {st("A believes pubkey(KP) of B")}


# -- properties ---------------------------------------------------------------------

POOL = sorted({s for case in CASES.values() for s in case[0] + case[3] if "?" not in s})
EXTRA = sorted({t for case in CASES.values() for t in case[1]})


@settings(max_examples=60, deadline=None)
@given(hs.sets(hs.sampled_from(POOL), max_size=8), hs.sets(hs.sampled_from(POOL), max_size=4))
def test_instantiate_is_monotone(small, more):
    stmts1 = [st(t) for t in small]
    stmts2 = stmts1 + [st(t) for t in more]
    uni = _universe(stmts2, EXTRA)
    for rule in catalog():
        a = {c for c, _ in instantiate(rule, stmts1, uni)}
        b = {c for c, _ in instantiate(rule, stmts2, uni)}
        assert a <= b, rule.name


@settings(max_examples=60, deadline=None)
@given(hs.sets(hs.sampled_from(POOL), max_size=8))
def test_constructive_conclusions_stay_in_universe(texts):
    stmts = [st(t) for t in texts]
    uni = _universe(stmts, [])
    for rule in catalog():
        if not rule.constructive:
            continue
        for c, just in instantiate(rule, stmts, uni):
            assert subject_term(c) in uni, (rule.name, c)
            assert just.rule == rule.name
            assert all(normalize(p) == p for p in just.premises)


def test_own_premises_give_own_conclusions():
    # each positive case, fed exactly its premises, yields only well-formed statements
    for name, (premises, extra, expected, _) in CASES.items():
        for c in _conclusions(name, premises, extra):
            assert normalize(c) == c
            assert not isinstance(subject_term(c), Starred) or c.__class__.__name__ == "Sees"
