from __future__ import annotations

from pathlib import Path

import pytest

from capjudge.grammar import SchemaGrammar, build_mask_index, compile_schema
from capjudge.vocab import load_vocabulary, synthetic_vocabulary

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def automaton():
    return compile_schema()


@pytest.fixture(scope="session")
def fingerprint():
    return SchemaGrammar().fingerprint()


@pytest.fixture(scope="session")
def small_vocab():
    return synthetic_vocabulary(512, seed=7)


@pytest.fixture(scope="session")
def small_index(automaton, small_vocab, fingerprint):
    return build_mask_index(automaton, small_vocab, fingerprint)


@pytest.fixture(scope="session")
def bpe_vocab():
    return load_vocabulary(FIXTURES / "vocab_bpe.json")


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    """Keep ambient credentials and endpoints out of every test."""
    monkeypatch.delenv("CAPJUDGE_API_KEY", raising=False)
    monkeypatch.delenv("CAPJUDGE_SCORER_ENDPOINT", raising=False)


@pytest.fixture()
def no_network(monkeypatch):
    """Make any use of the HTTP stack fail loudly."""
    import requests.sessions

    def _blocked(self, *args, **kwargs):
        raise AssertionError("network access attempted during an offline test")

    monkeypatch.setattr(requests.sessions.Session, "request", _blocked)
