"""Corpus ingestion and the text processing pipeline.

Documents come from either a tab-separated lines file (one document per
line, ``doc_id<TAB>text``) or a TREC-style SGML file (``<DOC>`` blocks
with a ``<DOCNO>`` element). Text is reduced to terms by lowercasing,
taking maximal ASCII alphabetic runs, dropping stopwords, and Porter
stemming. The vocabulary keeps stems whose collection frequency is at
least a threshold (2 by default) and assigns dense feature ids in sorted
term order.
"""

from __future__ import annotations

import importlib.resources
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import AbstractSet, Iterable, Iterator, Mapping, Sequence

from .porter import CachingStemmer

_TOKEN_RE = re.compile(r"[a-z]+")
# Identifiers travel through CSV cells and file names.
_ID_FORBIDDEN_RE = re.compile(r"[\s,/\\\x00]")

DEFAULT_MIN_COLLECTION_FREQUENCY = 2


class CorpusFormatError(ValueError):
    """A corpus, topics, or qrels file violates its format contract."""


class DuplicateDocIdError(CorpusFormatError):
    pass


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str


@dataclass(frozen=True)
class Topic:
    topic_id: str
    seed_query: str = ""
    description: str = ""


class Corpus:
    """An ordered document collection with unique ids."""

    def __init__(self, documents: Iterable[Document]):
        self._documents = list(documents)
        self._by_id: dict[str, Document] = {}
        for pos, doc in enumerate(self._documents):
            _validate_identifier(doc.doc_id, f"document {pos}")
            if doc.doc_id in self._by_id:
                raise DuplicateDocIdError(f"duplicate doc_id {doc.doc_id!r}")
            self._by_id[doc.doc_id] = doc

    def __len__(self) -> int:
        return len(self._documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._documents)

    def __getitem__(self, index: int) -> Document:
        return self._documents[index]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def get(self, doc_id: str) -> Document:
        return self._by_id[doc_id]

    @property
    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self._documents]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return self._documents == other._documents


def _validate_identifier(value: str, where: str) -> None:
    if not value:
        raise CorpusFormatError(f"{where}: empty identifier")
    if _ID_FORBIDDEN_RE.search(value):
        raise CorpusFormatError(
            f"{where}: identifier {value!r} contains whitespace or a comma"
        )


def load_stopwords() -> frozenset[str]:
    """Load the bundled SMART stopword list."""
    text = (
        importlib.resources.files("tarbench")
        .joinpath("data/smart_stopwords.txt")
        .read_text(encoding="utf-8")
    )
    return frozenset(text.split())


_DEFAULT_STOPWORDS: frozenset[str] | None = None


def default_stopwords() -> frozenset[str]:
    global _DEFAULT_STOPWORDS
    if _DEFAULT_STOPWORDS is None:
        _DEFAULT_STOPWORDS = load_stopwords()
    return _DEFAULT_STOPWORDS


def tokenize(text: str) -> list[str]:
    """Lowercase and split into maximal ASCII alphabetic runs.

    Digits, punctuation, and non-ASCII characters act as separators, so
    "FAS-140" yields ["fas"] and "don't" yields ["don", "t"].
    """
    return _TOKEN_RE.findall(text.lower())


class TextPipeline:
    """tokenize -> stopword filter -> stem, with a shared stem cache."""

    def __init__(self, stopwords: AbstractSet[str] | None = None):
        self.stopwords = default_stopwords() if stopwords is None else stopwords
        self._stem = CachingStemmer()

    def terms(self, text: str) -> list[str]:
        stop = self.stopwords
        stem = self._stem
        return [stem(t) for t in tokenize(text) if t not in stop]


def text_terms(text: str, stopwords: AbstractSet[str] | None = None) -> list[str]:
    """One-shot pipeline for small inputs; stopwords filter raw tokens."""
    return TextPipeline(stopwords).terms(text)


@dataclass(frozen=True)
class TermStats:
    feature_id: int
    collection_frequency: int
    document_frequency: int


@dataclass
class Vocabulary:
    """Stemmed terms retained by the collection frequency threshold."""

    n_documents: int
    terms: dict[str, TermStats] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.terms

    def feature_id(self, term: str) -> int:
        return self.terms[term].feature_id

    def get(self, term: str) -> TermStats | None:
        return self.terms.get(term)

    def sorted_terms(self) -> list[str]:
        return sorted(self.terms, key=lambda t: self.terms[t].feature_id)


def build_vocabulary(
    corpus: Corpus,
    stopwords: AbstractSet[str] | None = None,
    min_collection_frequency: int = DEFAULT_MIN_COLLECTION_FREQUENCY,
    pipeline: TextPipeline | None = None,
) -> Vocabulary:
    if min_collection_frequency < 1:
        raise ValueError("min_collection_frequency must be >= 1")
    pipe = pipeline or TextPipeline(stopwords)
    cf: Counter[str] = Counter()
    df: Counter[str] = Counter()
    for doc in corpus:
        terms = pipe.terms(doc.text)
        cf.update(terms)
        df.update(set(terms))
    kept = sorted(t for t, n in cf.items() if n >= min_collection_frequency)
    stats = {
        term: TermStats(fid, cf[term], df[term]) for fid, term in enumerate(kept)
    }
    return Vocabulary(n_documents=len(corpus), terms=stats)


def read_lines_corpus(path) -> Corpus:
    """Parse a doc_id<TAB>text file, one document per line."""
    documents = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                raise CorpusFormatError(f"line {lineno}: blank record")
            if "\t" not in line:
                raise CorpusFormatError(
                    f"line {lineno}: expected doc_id<TAB>text"
                )
            doc_id, text = line.split("\t", 1)
            _validate_identifier(doc_id, f"line {lineno}")
            documents.append(Document(doc_id, text))
    try:
        return Corpus(documents)
    except DuplicateDocIdError as exc:
        raise DuplicateDocIdError(f"{path}: {exc}") from None


def write_lines_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in corpus:
            if "\t" in doc.text or "\n" in doc.text:
                text = doc.text.replace("\t", " ").replace("\n", " ")
            else:
                text = doc.text
            fh.write(f"{doc.doc_id}\t{text}\n")


_DOC_RE = re.compile(r"<DOC>(.*?)</DOC>", re.IGNORECASE | re.DOTALL)
_DOCNO_RE = re.compile(r"<DOCNO>(.*?)</DOCNO>", re.IGNORECASE | re.DOTALL)
_TAG_RE = re.compile(r"<[^>]+>")


def read_trec_corpus(path) -> Corpus:
    """Parse TREC-style SGML: <DOC> blocks containing a <DOCNO> element.

    All other markup inside a block is stripped and treated as whitespace.
    """
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        data = fh.read()
    opens = len(re.findall(r"<DOC>", data, re.IGNORECASE))
    blocks = _DOC_RE.findall(data)
    if opens != len(blocks):
        raise CorpusFormatError(f"{path}: unterminated <DOC> block")
    documents = []
    for pos, block in enumerate(blocks, start=1):
        m = _DOCNO_RE.search(block)
        if m is None:
            raise CorpusFormatError(f"{path}: record {pos}: missing <DOCNO>")
        doc_id = m.group(1).strip()
        _validate_identifier(doc_id, f"record {pos}")
        body = block[: m.start()] + block[m.end():]
        text = _TAG_RE.sub(" ", body).strip()
        documents.append(Document(doc_id, text))
    try:
        return Corpus(documents)
    except DuplicateDocIdError as exc:
        raise DuplicateDocIdError(f"{path}: {exc}") from None


def read_corpus(path, fmt: str) -> Corpus:
    if fmt == "lines":
        return read_lines_corpus(path)
    if fmt == "trec":
        return read_trec_corpus(path)
    raise ValueError(f"unknown corpus format {fmt!r}")


def read_topics(path) -> list[Topic]:
    """Parse topic_id<TAB>seed_query<TAB>description lines."""
    topics = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 2)
            if len(parts) != 3:
                raise CorpusFormatError(
                    f"line {lineno}: expected topic_id<TAB>seed_query<TAB>description"
                )
            topic_id, seed_query, description = parts
            _validate_identifier(topic_id, f"line {lineno}")
            if topic_id in seen:
                raise CorpusFormatError(f"line {lineno}: duplicate topic {topic_id!r}")
            seen.add(topic_id)
            topics.append(Topic(topic_id, seed_query, description))
    return topics


def write_topics(topics: Sequence[Topic], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in topics:
            fh.write(f"{t.topic_id}\t{t.seed_query}\t{t.description}\n")
