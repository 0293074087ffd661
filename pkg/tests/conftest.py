import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gnylogic import fixture, verify  # noqa: E402
from gnylogic.dsl import Context, parse_statement, parse_term  # noqa: E402
from gnylogic.formulae import Atom  # noqa: E402

# a small vocabulary for rule-level tests
ATOMS = {
    "N": Atom("nonce", "N"),
    "M": Atom("nonce", "M"),
    "T": Atom("timestamp", "T"),
    "K": Atom("sym-key", "K"),
    "L": Atom("literal", "L"),
}


def small_ctx():
    return Context(principals={"A", "B", "C"}, atoms=dict(ATOMS), keypairs={"KP", "KQ"})


def st(text, ctx=None):
    return parse_statement(text, ctx or small_ctx())


def tm(text, ctx=None):
    return parse_term(text, ctx or small_ctx())


_RUNS = {}


def completed(name):
    """Cached full run of a built-in fixture."""
    if name not in _RUNS:
        _RUNS[name] = verify(fixture(name))
    return _RUNS[name]


@pytest.fixture
def tls():
    return fixture("tls-named-server")


@pytest.fixture
def kerberos():
    return fixture("kerberos")
