"""Deterministic synthetic collections with known relevance structure.

Documents are bags of three-letter consonant-only words, which are inert
under both stemming and the stopword list, so the realized vocabulary is
exactly the generated one. Non-relevant documents draw words from a
Zipf(1.0) background distribution over the vocabulary. Relevant documents
mix draws from a small uniform topical distribution (probability
topical_mixing per token) with background draws.

By default the topical terms are background words at middling Zipf ranks,
so they also occur, less densely, in non-relevant documents; a keyword
search is then a noisy signal rather than a perfect classifier. Setting
topical_rank_start=None instead allocates topical terms outside the
background vocabulary, making relevant documents exactly separable when
topical_mixing is 1.0.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ._rng import derive_rng
from .corpus import Corpus, Document, Topic, write_lines_corpus, write_topics
from .engine import Qrels, write_qrels

_CONSONANTS = "bcdfghjklmnpqrtvwxz"
_WORD_LENGTH = 3
_MAX_WORDS = len(_CONSONANTS) ** _WORD_LENGTH
_QUERY_TERM_COUNT = 5


def synthetic_word(index: int) -> str:
    """The index-th three-letter consonant word, in a fixed enumeration."""
    if not 0 <= index < _MAX_WORDS:
        raise ValueError(f"word index out of range: {index}")
    base = len(_CONSONANTS)
    letters = []
    for _ in range(_WORD_LENGTH):
        letters.append(_CONSONANTS[index % base])
        index //= base
    return "".join(reversed(letters))


@dataclass(frozen=True)
class SyntheticSpec:
    n_documents: int
    prevalence: float
    vocab_size: int = 1000
    doc_length_mean: float = 40.0
    topical_term_count: int = 20
    topical_mixing: float = 0.8
    rng_seed: int = 0
    # 1-based Zipf rank of the first topical term; None draws the topical
    # terms from outside the background vocabulary (disjoint support).
    topical_rank_start: int | None = 15

    def __post_init__(self):
        if self.n_documents < 2:
            raise ValueError("n_documents must be >= 2")
        if not 0.0 < self.prevalence < 0.5:
            raise ValueError("prevalence must be in (0, 0.5)")
        if math.floor(self.n_documents * self.prevalence) < 1:
            raise ValueError("prevalence yields no relevant documents")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        if self.doc_length_mean < 1.0:
            raise ValueError("doc_length_mean must be >= 1")
        if self.topical_term_count < 1:
            raise ValueError("topical_term_count must be >= 1")
        if not 0.0 < self.topical_mixing <= 1.0:
            raise ValueError("topical_mixing must be in (0, 1]")
        extra = self.topical_term_count if self.topical_rank_start is None else 0
        if self.vocab_size + extra > _MAX_WORDS:
            raise ValueError(f"vocabulary exceeds the {_MAX_WORDS} available words")
        if self.topical_rank_start is not None:
            if self.topical_rank_start < 1:
                raise ValueError("topical_rank_start must be >= 1")
            if self.topical_rank_start + self.topical_term_count - 1 > self.vocab_size:
                raise ValueError("topical ranks extend past the vocabulary")

    @property
    def n_relevant(self) -> int:
        return math.floor(self.n_documents * self.prevalence)


@dataclass
class TestbedBundle:
    # Not a test case despite the name; keeps pytest collection away.
    __test__ = False

    spec: SyntheticSpec
    corpus: Corpus
    qrels: Qrels
    topic: Topic
    relevant_doc_ids: frozenset[str]
    topical_terms: tuple[str, ...]

    @property
    def topic_id(self) -> str:
        return self.topic.topic_id


def generate(spec: SyntheticSpec) -> TestbedBundle:
    """Generate the collection; identical spec gives identical output."""
    rng = derive_rng(spec.rng_seed, "testbed")
    n, vsize = spec.n_documents, spec.vocab_size
    background = [synthetic_word(i) for i in range(vsize)]
    if spec.topical_rank_start is None:
        topical = [
            synthetic_word(vsize + i) for i in range(spec.topical_term_count)
        ]
    else:
        lo = spec.topical_rank_start - 1
        topical = background[lo : lo + spec.topical_term_count]

    ranks = np.arange(1, vsize + 1, dtype=np.float64)
    zipf = 1.0 / ranks
    zipf /= zipf.sum()
    zipf_cdf = np.cumsum(zipf)
    zipf_cdf[-1] = 1.0

    relevant_rows = set(
        int(r) for r in rng.choice(n, size=spec.n_relevant, replace=False)
    )
    lengths = np.maximum(1, rng.poisson(spec.doc_length_mean, size=n))

    background_arr = np.asarray(background, dtype=np.str_)
    topical_arr = np.asarray(topical, dtype=np.str_)
    n_topical_terms = len(topical)
    documents = []
    topical_draw_counts = np.zeros(n_topical_terms, dtype=np.int64)
    background_draw_counts = np.zeros(vsize, dtype=np.int64)
    for row in range(n):
        length = int(lengths[row])
        if row in relevant_rows:
            n_topical = int(rng.binomial(length, spec.topical_mixing))
        else:
            n_topical = 0
        words = []
        if n_topical:
            picks = rng.integers(n_topical_terms, size=n_topical)
            topical_draw_counts += np.bincount(picks, minlength=n_topical_terms)
            words.extend(topical_arr[picks])
        n_background = length - n_topical
        if n_background:
            draws = np.searchsorted(zipf_cdf, rng.random(n_background))
            background_draw_counts += np.bincount(draws, minlength=vsize)
            words.extend(background_arr[draws])
        documents.append(Document(f"d{row:06d}", " ".join(words)))

    topical_cf: dict[str, int] = {}
    for t_idx, term in enumerate(topical):
        realized = int(topical_draw_counts[t_idx])
        if spec.topical_rank_start is not None:
            realized += int(
                background_draw_counts[spec.topical_rank_start - 1 + t_idx]
            )
        topical_cf[term] = realized

    corpus = Corpus(documents)
    relevant_ids = frozenset(f"d{row:06d}" for row in relevant_rows)
    topic_id = f"synthetic-{spec.rng_seed}"
    qrels = Qrels()
    for doc_id in sorted(relevant_ids):
        qrels.add(topic_id, doc_id, 1)

    by_cf = sorted(topical, key=lambda t: (-topical_cf[t], t))
    query = " ".join(by_cf[: min(_QUERY_TERM_COUNT, len(by_cf))])
    description = "relevant documents mention " + " ".join(by_cf)
    topic = Topic(topic_id, seed_query=query, description=description)
    return TestbedBundle(
        spec=spec,
        corpus=corpus,
        qrels=qrels,
        topic=topic,
        relevant_doc_ids=relevant_ids,
        topical_terms=tuple(topical),
    )


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_testbed(bundle: TestbedBundle, out_dir) -> dict:
    """Write corpus.tsv, qrels.txt, topics.tsv, and manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_path = out / "corpus.tsv"
    qrels_path = out / "qrels.txt"
    topics_path = out / "topics.tsv"
    write_lines_corpus(bundle.corpus, corpus_path)
    write_qrels(bundle.qrels, qrels_path)
    write_topics([bundle.topic], topics_path)
    manifest = {
        "kind": "synthetic-testbed",
        "spec": asdict(bundle.spec),
        "topic_id": bundle.topic_id,
        "n_documents": len(bundle.corpus),
        "n_relevant": len(bundle.relevant_doc_ids),
        "topical_terms": list(bundle.topical_terms),
        "files": {
            "corpus.tsv": _sha256(corpus_path),
            "qrels.txt": _sha256(qrels_path),
            "topics.tsv": _sha256(topics_path),
        },
    }
    tmp = out / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, out / "manifest.json")
    return manifest
