"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import pytest

from tarbench.corpus import Corpus, Document, TextPipeline, Topic, build_vocabulary
from tarbench.engine import Qrels
from tarbench.search import build_index
from tarbench.vectors import vectorize_corpus

NO_STOPWORDS: frozenset[str] = frozenset()


class Collection:
    """A corpus with its derived vocabulary, vectors, and inverted index."""

    def __init__(self, texts, ids=None, stopwords=NO_STOPWORDS, min_cf=1):
        if ids is None:
            ids = [f"d{i:03d}" for i in range(len(texts))]
        self.corpus = Corpus(Document(i, t) for i, t in zip(ids, texts))
        self.pipeline = TextPipeline(stopwords)
        self.vocabulary = build_vocabulary(
            self.corpus, min_collection_frequency=min_cf, pipeline=self.pipeline
        )
        self.vc = vectorize_corpus(self.corpus, self.vocabulary, pipeline=self.pipeline)
        self.index = build_index(self.corpus, self.vocabulary, pipeline=self.pipeline)


def make_qrels(topic_id: str, relevant, non_relevant=()) -> Qrels:
    qrels = Qrels()
    for doc_id in relevant:
        qrels.add(topic_id, doc_id, 1)
    for doc_id in non_relevant:
        qrels.add(topic_id, doc_id, 0)
    return qrels


@pytest.fixture
def topic():
    return Topic("t1", seed_query="gold mining", description="gold mining reports")
