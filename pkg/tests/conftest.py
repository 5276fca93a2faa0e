from pathlib import Path

import pytest

from swaprl.vocab import Vocabulary, build_vocabulary, compute_priors

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def corpus_lines() -> list[str]:
    return (DATA / "corpus_10k.smi").read_text(encoding="utf-8").splitlines()


@pytest.fixture(scope="session")
def heldout_lines() -> list[str]:
    return (DATA / "heldout_1k.smi").read_text(encoding="utf-8").splitlines()


@pytest.fixture(scope="session")
def vocab(corpus_lines) -> Vocabulary:
    return build_vocabulary(corpus_lines)


@pytest.fixture(scope="session")
def priors(corpus_lines, vocab):
    return compute_priors(corpus_lines, vocab)
