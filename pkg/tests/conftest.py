"""Shared fixtures: toy corpora, parameter factories, fd-gradient helper."""

from __future__ import annotations

import numpy as np
import pytest

from sentrank.corpus import (
    CorpusIndex,
    Query,
    QrelTable,
    build_index,
    make_document,
)
from sentrank.qnet import init_q_params
from sentrank.synth import generate_synthetic_corpus
from sentrank.user_model import UserModelParams, init_user_params

WORDS = (
    "alpha bravo charlie delta echo foxtrot golf hotel india juliet "
    "kilo lima mike november oscar papa quebec romeo sierra tango"
).split()


def random_sentence(rng: np.random.Generator, n_words: int = 4) -> str:
    return " ".join(WORDS[int(i)] for i in rng.integers(0, len(WORDS), n_words))


def make_toy_docs(rng: np.random.Generator, n_docs: int, n_sents: int = 3):
    """Small random documents with ids d0..d{n-1}."""
    docs = []
    for j in range(n_docs):
        texts = [random_sentence(rng) + "." for _ in range(n_sents)]
        docs.append(make_document(f"d{j}", texts))
    return {d.doc_id: d for d in docs}


@pytest.fixture(scope="session")
def toy_index() -> CorpusIndex:
    """Five hand-written documents used by BM25 and ranking tests."""
    docs = [
        make_document("doc1", ["the cat sat on the mat.", "cats purr softly."]),
        make_document("doc2", ["dogs chase the cat.", "the dog barks loudly."]),
        make_document("doc3", ["birds fly south.", "a bird sings at dawn."]),
        make_document("doc4", ["the cat and the dog play.", "animals sleep."]),
        make_document("doc5", ["fish swim in water.", "the pond is calm."]),
    ]
    return build_index(docs)


@pytest.fixture(scope="session")
def toy_query() -> Query:
    return Query("q1", "cat")


@pytest.fixture(scope="session")
def toy_qrels() -> QrelTable:
    return QrelTable({
        ("q1", "doc1"): 2,
        ("q1", "doc2"): 1,
        ("q1", "doc4"): 1,
        ("q1", "doc3"): 0,
    })


@pytest.fixture(scope="session")
def synth_dataset():
    """The full default synthetic corpus (8 topics x 8 queries x 30 docs)."""
    return generate_synthetic_corpus(seed=7)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def u_params() -> UserModelParams:
    return init_user_params(seed=5)


@pytest.fixture
def q_params():
    return init_q_params(seed=6, slate_size=4, hidden=16)


def fd_gradient(f, arr: np.ndarray, coords, eps: float = 1e-5) -> dict:
    """Central finite differences of scalar f at the given flat coords."""
    flat = arr.reshape(-1)
    out = {}
    for c in coords:
        orig = flat[c]
        flat[c] = orig + eps
        up = f()
        flat[c] = orig - eps
        down = f()
        flat[c] = orig
        out[c] = (up - down) / (2.0 * eps)
    return out


def assert_grad_close(analytic: np.ndarray, numeric: dict, rtol: float = 1e-4):
    flat = analytic.reshape(-1)
    for c, num in numeric.items():
        ref = max(abs(num), abs(flat[c]), 1e-8)
        assert abs(flat[c] - num) / ref < rtol, (
            f"coord {c}: analytic {flat[c]:.8g} vs numeric {num:.8g}"
        )
