"""Workspace persistence: create, reload, verify checksums."""

from __future__ import annotations

import numpy as np
import pytest

from tarbench.corpus import Corpus, Document, Topic
from tarbench.engine import Method, RunConfig, SeedMode, run_method
from tarbench.search import bm25_rank
from tarbench.workspace import (
    WorkspaceError,
    create_workspace,
    load_workspace,
)

from conftest import make_qrels

TEXTS = [
    "bcd bcd fgh",
    "bcd fgh fgh jkl",
    "fgh jkl mnp",
    "jkl mnp qrt zzz",
    "mnp qrt bcd",
    "qrt vwx vwx",
]

ARTIFACTS = ["corpus.tsv", "doc_terms.tsv", "vectors.txt", "vocabulary.tsv"]


def make_corpus() -> Corpus:
    return Corpus(Document(f"d{i:03d}", t) for i, t in enumerate(TEXTS))


@pytest.fixture
def workspace(tmp_path):
    ws = create_workspace(
        tmp_path / "ws", make_corpus(), source="unit", min_collection_frequency=2
    )
    return ws


class TestRoundTrip:
    def test_reload_is_bit_exact(self, workspace):
        loaded = load_workspace(workspace.directory)
        assert loaded.vc.doc_ids == workspace.vc.doc_ids
        for attr in ("data", "indices", "indptr"):
            assert np.array_equal(
                getattr(loaded.vc.matrix, attr), getattr(workspace.vc.matrix, attr)
            )
        assert loaded.vocabulary.terms == workspace.vocabulary.terms
        assert loaded.vocabulary.n_documents == len(TEXTS)
        assert loaded.index.postings == workspace.index.postings
        assert loaded.index.doc_lengths == workspace.index.doc_lengths
        assert loaded.index.n_documents == len(TEXTS)
        assert loaded.manifest == workspace.manifest

    def test_rare_terms_count_toward_length_only(self, workspace):
        # zzz occurs once, below the collection frequency threshold of
        # two, so it has no postings but still lengthens its document.
        loaded = load_workspace(workspace.directory)
        assert "zzz" not in loaded.vocabulary
        assert "zzz" not in loaded.index.postings
        assert loaded.index.doc_lengths["d003"] == 4

    def test_bm25_identical_through_reload(self, workspace):
        loaded = load_workspace(workspace.directory)
        query = "bcd jkl"
        fresh = bm25_rank(query, workspace.index, k=len(TEXTS))
        again = bm25_rank(query, loaded.index, k=len(TEXTS))
        assert fresh.hits == again.hits

    def test_review_run_identical_through_reload(self, workspace):
        loaded = load_workspace(workspace.directory)
        qrels = make_qrels("t1", ["d001", "d003"], ["d000"])
        config = RunConfig(
            method=Method.AUTOTAR,
            seed_mode=SeedMode.EXPLICIT,
            explicit_seed="d001",
            effort_budget=6,
        )
        a = run_method(config, workspace.vc, Topic("t1"), qrels)
        b = run_method(config, loaded.vc, Topic("t1"), qrels)
        assert a.entries == b.entries


class TestDeterminism:
    def test_identical_inputs_identical_bytes(self, tmp_path):
        a = create_workspace(
            tmp_path / "a", make_corpus(), source="unit", min_collection_frequency=2
        )
        b = create_workspace(
            tmp_path / "b", make_corpus(), source="unit", min_collection_frequency=2
        )
        assert a.manifest == b.manifest
        for name in ARTIFACTS + ["workspace.json"]:
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_no_temp_files_left(self, workspace):
        names = sorted(p.name for p in workspace.directory.iterdir())
        assert names == sorted(ARTIFACTS + ["workspace.json"])


class TestManifest:
    def test_contents(self, workspace):
        manifest = workspace.manifest
        assert manifest["kind"] == "workspace"
        assert manifest["source"] == "unit"
        assert manifest["n_documents"] == len(TEXTS)
        assert manifest["vocabulary_size"] == 6
        assert manifest["min_collection_frequency"] == 2
        assert sorted(manifest["checksums"]) == ARTIFACTS
        for digest in manifest["checksums"].values():
            assert len(digest) == 64
            int(digest, 16)

    def test_vocabulary_file_format(self, workspace):
        lines = (workspace.directory / "vocabulary.tsv").read_text().splitlines()
        assert lines == sorted(lines)
        # bcd: twice in d000, once each in d001 and d004.
        assert lines[0] == "bcd\t0\t4\t3"
        assert len(lines) == 6

    def test_forward_index_format(self, workspace):
        lines = (workspace.directory / "doc_terms.tsv").read_text().splitlines()
        by_id = dict(line.split("\t", 1) for line in lines)
        assert by_id["d003"] == "4\tjkl:1 mnp:1 qrt:1"
        assert by_id["d005"] == "3\tqrt:1 vwx:2"


class TestVerification:
    def test_checksum_mismatch(self, workspace):
        path = workspace.directory / "vectors.txt"
        path.write_text(path.read_text() + "tampered\n", encoding="utf-8")
        with pytest.raises(WorkspaceError, match="checksum mismatch"):
            load_workspace(workspace.directory)

    def test_missing_artifact(self, workspace):
        (workspace.directory / "corpus.tsv").unlink()
        with pytest.raises(WorkspaceError, match="missing artifact"):
            load_workspace(workspace.directory)

    def test_not_a_workspace(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        with pytest.raises(WorkspaceError, match="not a workspace"):
            load_workspace(empty)
