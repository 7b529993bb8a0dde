from __future__ import annotations

from pathlib import Path

import pytest

from metarec.corpus import load_corpus
from metarec.meta_dataset import build_meta_dataset
from metarec.synth import planted_corpus
from metarec.text_index import build_index

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def toy_store():
    return load_corpus(FIXTURES / "toy_corpus.jsonl", FIXTURES / "toy_judgments.csv")


@pytest.fixture(scope="session")
def toy_index(toy_store):
    return build_index(toy_store)


@pytest.fixture(scope="session")
def planted():
    return planted_corpus(seed=0)


@pytest.fixture(scope="session")
def planted_store(planted):
    return planted.store()


@pytest.fixture(scope="session")
def planted_index(planted_store):
    return build_index(planted_store)


@pytest.fixture(scope="session")
def planted_dataset(planted_store, planted_index):
    return build_meta_dataset(planted_store, k=10, index=planted_index)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
