import os

import pytest
from hypothesis import HealthCheck, settings

from privshard.store import SecureStore
from privshard.synth import gen_corpus
from privshard.vault import generate_keys

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def keys():
    return generate_keys(seed=1234)


@pytest.fixture(scope="session")
def other_keys():
    return generate_keys(seed=4321)


@pytest.fixture(scope="session")
def corpus():
    return gen_corpus(300, seed=11)


@pytest.fixture
def small_store(keys):
    store = SecureStore.create(keys)
    for text in [
        "mail a@b.com now",
        "gdpr compliance review with consent forms",
        "ssn 123-45-6789 on the password policy sheet",
        "no secrets here, only freight and shipping",
    ]:
        store.ingest(text, keys)
    return store


@pytest.fixture(scope="session")
def finalized_corpus_store(keys, corpus):
    store = SecureStore.create(keys)
    for d in corpus:
        store.ingest(d.text, keys)
    store.finalize(k=10, seed=3)
    return store


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""

    def record(number: int, name: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {name} ({detail})"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
