"""Cornell ltc term weighting and document vector construction.

A document's weight for term t is (1 + ln tf) * ln(N / df), using natural
logarithms, and the vector is L2 normalized. A term present in every
document has idf exactly zero and is dropped from the vector rather than
carried as an explicit zero.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import AbstractSet, Iterable, Sequence

import numpy as np
from scipy import sparse

from .corpus import Corpus, TextPipeline, Vocabulary


@dataclass(frozen=True)
class SparseVector:
    """A sorted sparse feature vector with unit L2 norm (or empty)."""

    feature_ids: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.feature_ids) != len(self.weights):
            raise ValueError("feature_ids and weights length mismatch")
        if any(b <= a for a, b in zip(self.feature_ids, self.feature_ids[1:])):
            raise ValueError("feature_ids must be strictly increasing")

    def __len__(self) -> int:
        return len(self.feature_ids)

    def norm(self) -> float:
        return math.sqrt(math.fsum(w * w for w in self.weights))

    def dot(self, other: "SparseVector") -> float:
        i = j = 0
        acc = 0.0
        a_ids, a_w = self.feature_ids, self.weights
        b_ids, b_w = other.feature_ids, other.weights
        while i < len(a_ids) and j < len(b_ids):
            if a_ids[i] == b_ids[j]:
                acc += a_w[i] * b_w[j]
                i += 1
                j += 1
            elif a_ids[i] < b_ids[j]:
                i += 1
            else:
                j += 1
        return acc


EMPTY_VECTOR = SparseVector((), ())


def ltc_weights(term_counts: Counter[str] | dict[str, int], vocabulary: Vocabulary) -> SparseVector:
    """Weight a bag of pipeline terms against a vocabulary."""
    n = vocabulary.n_documents
    entries = []
    for term, tf in term_counts.items():
        if tf <= 0:
            continue
        stats = vocabulary.get(term)
        if stats is None:
            continue
        idf = math.log(n / stats.document_frequency)
        if idf == 0.0:
            continue
        w = (1.0 + math.log(tf)) * idf
        entries.append((stats.feature_id, w))
    if not entries:
        return EMPTY_VECTOR
    entries.sort()
    norm = math.sqrt(math.fsum(w * w for _, w in entries))
    return SparseVector(
        tuple(fid for fid, _ in entries),
        tuple(w / norm for _, w in entries),
    )


def vectorize_text(
    text: str,
    vocabulary: Vocabulary,
    stopwords: AbstractSet[str] | None = None,
    pipeline: TextPipeline | None = None,
) -> SparseVector:
    pipe = pipeline or TextPipeline(stopwords)
    return ltc_weights(Counter(pipe.terms(text)), vocabulary)


@dataclass
class VectorizedCorpus:
    """Row-aligned ltc vectors for a whole collection."""

    doc_ids: list[str]
    matrix: sparse.csr_matrix
    vocabulary: Vocabulary

    def __post_init__(self):
        self.row_of = {d: i for i, d in enumerate(self.doc_ids)}
        # Fixed-width unicode so np.lexsort can use it as a tie-break key.
        self.doc_id_array = np.asarray(self.doc_ids, dtype=np.str_)

    def __len__(self) -> int:
        return len(self.doc_ids)

    @property
    def n_features(self) -> int:
        return self.matrix.shape[1]

    def vector(self, doc_id: str) -> SparseVector:
        return self.row_vector(self.row_of[doc_id])

    def row_vector(self, row: int) -> SparseVector:
        sl = self.matrix.getrow(row)
        order = np.argsort(sl.indices, kind="stable")
        return SparseVector(
            tuple(int(i) for i in sl.indices[order]),
            tuple(float(w) for w in sl.data[order]),
        )


def vectorize_corpus(
    corpus: Corpus,
    vocabulary: Vocabulary,
    stopwords: AbstractSet[str] | None = None,
    pipeline: TextPipeline | None = None,
) -> VectorizedCorpus:
    pipe = pipeline or TextPipeline(stopwords)
    n_features = len(vocabulary)
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    doc_ids = []
    for doc in corpus:
        vec = ltc_weights(Counter(pipe.terms(doc.text)), vocabulary)
        indices.extend(vec.feature_ids)
        data.extend(vec.weights)
        indptr.append(len(indices))
        doc_ids.append(doc.doc_id)
    matrix = sparse.csr_matrix(
        (
            np.asarray(data, dtype=np.float64),
            np.asarray(indices, dtype=np.int32),
            np.asarray(indptr, dtype=np.int64),
        ),
        shape=(len(doc_ids), n_features),
    )
    return VectorizedCorpus(doc_ids, matrix, vocabulary)


def rows_to_csr(vectors: Sequence[SparseVector], n_features: int) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for vec in vectors:
        indices.extend(vec.feature_ids)
        data.extend(vec.weights)
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (
            np.asarray(data, dtype=np.float64),
            np.asarray(indices, dtype=np.int32),
            np.asarray(indptr, dtype=np.int64),
        ),
        shape=(len(vectors), n_features),
    )


def dump_vectors(items: Iterable[tuple[str, SparseVector]], path, digits: int = 9) -> None:
    """Write one line per document: doc_id then fid:weight pairs.

    Weights use `digits` significant digits; 17 round-trips float64 exactly.
    """
    fmt = f"%.{digits}g"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc_id, vec in items:
            pairs = " ".join(
                f"{fid}:{fmt % w}" for fid, w in zip(vec.feature_ids, vec.weights)
            )
            fh.write(f"{doc_id} {pairs}".rstrip() + "\n")


def load_vectors(path) -> list[tuple[str, SparseVector]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                raise ValueError(f"line {lineno}: blank vector record")
            doc_id = parts[0]
            fids = []
            weights = []
            for pair in parts[1:]:
                fid_s, _, w_s = pair.partition(":")
                fids.append(int(fid_s))
                weights.append(float(w_s))
            out.append((doc_id, SparseVector(tuple(fids), tuple(weights))))
    return out
