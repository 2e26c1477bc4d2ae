"""Inverted index and Okapi BM25 ranking.

The index stores postings only for vocabulary terms, but document length
counts every pipeline term of the document, in or out of vocabulary. BM25
uses k1=1.2 and b=0.75 by default with idf = ln((N - df + 0.5) / (df + 0.5));
negative idf for very common terms is kept as is. Documents whose final
score is exactly zero are omitted from the ranking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import AbstractSet

from .corpus import Corpus, TextPipeline, Vocabulary

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


@dataclass
class InvertedIndex:
    n_documents: int
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]

    @property
    def avg_doc_length(self) -> float:
        if not self.doc_lengths:
            return 0.0
        return sum(self.doc_lengths.values()) / len(self.doc_lengths)

    def document_frequency(self, term: str) -> int:
        plist = self.postings.get(term)
        return len(plist) if plist else 0


def build_index(
    corpus: Corpus,
    vocabulary: Vocabulary,
    stopwords: AbstractSet[str] | None = None,
    pipeline: TextPipeline | None = None,
) -> InvertedIndex:
    pipe = pipeline or TextPipeline(stopwords)
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in corpus:
        terms = pipe.terms(doc.text)
        doc_lengths[doc.doc_id] = len(terms)
        counts: dict[str, int] = {}
        for t in terms:
            if t in vocabulary:
                counts[t] = counts.get(t, 0) + 1
        for term, tf in counts.items():
            postings.setdefault(term, []).append((doc.doc_id, tf))
    for plist in postings.values():
        plist.sort(key=lambda entry: entry[0])
    return InvertedIndex(len(corpus), postings, doc_lengths)


@dataclass
class Bm25Result:
    hits: list[tuple[str, float]]
    vacuous: bool

    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.hits]


def bm25_idf(n_documents: int, document_frequency: int) -> float:
    return math.log(
        (n_documents - document_frequency + 0.5) / (document_frequency + 0.5)
    )


def bm25_rank(
    query: str,
    index: InvertedIndex,
    k: int,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    stopwords: AbstractSet[str] | None = None,
    pipeline: TextPipeline | None = None,
) -> Bm25Result:
    """Rank the top k documents for a query.

    Duplicate query terms are scored once. Ties break by ascending doc_id.
    A query with no indexed term is a vacuous query: the result carries an
    empty ranking and the vacuous flag instead of an arbitrary one.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    pipe = pipeline or TextPipeline(stopwords)
    terms = []
    seen = set()
    for term in pipe.terms(query):
        if term not in seen:
            seen.add(term)
            terms.append(term)
    indexed = [t for t in terms if t in index.postings]
    if not indexed:
        return Bm25Result([], vacuous=True)
    n = index.n_documents
    avgdl = index.avg_doc_length
    scores: dict[str, float] = {}
    for term in indexed:
        plist = index.postings[term]
        idf = bm25_idf(n, len(plist))
        for doc_id, tf in plist:
            dl = index.doc_lengths[doc_id]
            if avgdl > 0.0:
                denom = tf + k1 * (1.0 - b + b * dl / avgdl)
            else:
                denom = tf + k1
            contrib = idf * tf * (k1 + 1.0) / denom
            scores[doc_id] = scores.get(doc_id, 0.0) + contrib
    hits = [(d, s) for d, s in scores.items() if s != 0.0]
    hits.sort(key=lambda e: (-e[1], e[0]))
    return Bm25Result(hits[:k], vacuous=False)
