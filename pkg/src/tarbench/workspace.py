"""On-disk workspace holding the derived artifacts of an ingested corpus.

A workspace directory contains a normalized copy of the corpus, the
vocabulary with term statistics, full-precision document vectors, and a
forward index (per-document term counts plus pipeline length). Loading a
workspace reconstructs the vectorized corpus and the inverted index
byte-for-byte without re-running tokenization or stemming. The manifest
records sha256 checksums of every artifact and carries no timestamps, so
identical inputs produce identical workspaces.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .corpus import (
    Corpus,
    TermStats,
    TextPipeline,
    Vocabulary,
    write_lines_corpus,
)
from .search import InvertedIndex
from .vectors import (
    SparseVector,
    VectorizedCorpus,
    dump_vectors,
    load_vectors,
    rows_to_csr,
)

MANIFEST_NAME = "workspace.json"
CORPUS_NAME = "corpus.tsv"
VOCABULARY_NAME = "vocabulary.tsv"
VECTORS_NAME = "vectors.txt"
FORWARD_INDEX_NAME = "doc_terms.tsv"


class WorkspaceError(RuntimeError):
    pass


@dataclass
class Workspace:
    directory: Path
    vc: VectorizedCorpus
    index: InvertedIndex
    manifest: dict

    @property
    def vocabulary(self) -> Vocabulary:
        return self.vc.vocabulary


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def create_workspace(
    directory,
    corpus: Corpus,
    source: str = "",
    min_collection_frequency: int = 2,
    pipeline: TextPipeline | None = None,
) -> Workspace:
    """Build all derived artifacts for a corpus and persist them."""
    from .corpus import build_vocabulary
    from .search import build_index
    from .vectors import vectorize_corpus

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    pipe = pipeline or TextPipeline()
    vocabulary = build_vocabulary(
        corpus, min_collection_frequency=min_collection_frequency, pipeline=pipe
    )
    vc = vectorize_corpus(corpus, vocabulary, pipeline=pipe)
    index = build_index(corpus, vocabulary, pipeline=pipe)

    write_lines_corpus(corpus, out / CORPUS_NAME)

    vocab_lines = []
    for term in vocabulary.sorted_terms():
        s = vocabulary.terms[term]
        vocab_lines.append(
            f"{term}\t{s.feature_id}\t{s.collection_frequency}\t{s.document_frequency}"
        )
    _atomic_write(out / VOCABULARY_NAME, "\n".join(vocab_lines) + "\n" if vocab_lines else "")

    dump_vectors(
        ((doc_id, vc.row_vector(i)) for i, doc_id in enumerate(vc.doc_ids)),
        out / VECTORS_NAME,
        digits=17,
    )

    forward_lines = []
    for doc in corpus:
        terms = pipe.terms(doc.text)
        counts: dict[str, int] = {}
        for t in terms:
            if t in vocabulary:
                counts[t] = counts.get(t, 0) + 1
        pairs = " ".join(f"{t}:{counts[t]}" for t in sorted(counts))
        forward_lines.append(f"{doc.doc_id}\t{len(terms)}\t{pairs}".rstrip())
    _atomic_write(
        out / FORWARD_INDEX_NAME,
        "\n".join(forward_lines) + "\n" if forward_lines else "",
    )

    manifest = {
        "kind": "workspace",
        "source": str(source),
        "n_documents": len(corpus),
        "vocabulary_size": len(vocabulary),
        "min_collection_frequency": min_collection_frequency,
        "checksums": {
            name: _sha256_file(out / name)
            for name in (CORPUS_NAME, VOCABULARY_NAME, VECTORS_NAME, FORWARD_INDEX_NAME)
        },
    }
    _atomic_write(out / MANIFEST_NAME, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return Workspace(out, vc, index, manifest)


def load_workspace(directory) -> Workspace:
    """Load artifacts, verifying checksums against the manifest."""
    root = Path(directory)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise WorkspaceError(f"{root}: not a workspace (missing {MANIFEST_NAME})")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    checksums = manifest.get("checksums", {})
    for name, expected in checksums.items():
        path = root / name
        if not path.is_file():
            raise WorkspaceError(f"{root}: missing artifact {name}")
        actual = _sha256_file(path)
        if actual != expected:
            raise WorkspaceError(
                f"{root}: checksum mismatch for {name} "
                f"(expected {expected[:12]}..., got {actual[:12]}...)"
            )

    n_documents = int(manifest["n_documents"])
    terms: dict[str, TermStats] = {}
    vocab_path = root / VOCABULARY_NAME
    raw = vocab_path.read_text(encoding="utf-8")
    for lineno, line in enumerate(filter(None, raw.splitlines()), start=1):
        parts = line.split("\t")
        if len(parts) != 4:
            raise WorkspaceError(f"{vocab_path}: line {lineno}: expected 4 fields")
        term, fid_s, cf_s, df_s = parts
        terms[term] = TermStats(int(fid_s), int(cf_s), int(df_s))
    vocabulary = Vocabulary(n_documents=n_documents, terms=terms)

    loaded = load_vectors(root / VECTORS_NAME)
    doc_ids = [doc_id for doc_id, _ in loaded]
    matrix = rows_to_csr([vec for _, vec in loaded], len(vocabulary))
    vc = VectorizedCorpus(doc_ids, matrix, vocabulary)

    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    fwd_path = root / FORWARD_INDEX_NAME
    for lineno, line in enumerate(
        filter(None, fwd_path.read_text(encoding="utf-8").splitlines()), start=1
    ):
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise WorkspaceError(f"{fwd_path}: line {lineno}: expected 2 or 3 fields")
        doc_id = parts[0]
        doc_lengths[doc_id] = int(parts[1])
        if len(parts) == 3 and parts[2]:
            for pair in parts[2].split(" "):
                term, _, tf_s = pair.rpartition(":")
                postings.setdefault(term, []).append((doc_id, int(tf_s)))
    for plist in postings.values():
        plist.sort(key=lambda entry: entry[0])
    index = InvertedIndex(n_documents, postings, doc_lengths)
    return Workspace(root, vc, index, manifest)
