"""Review engine: seeding, the four review strategies, and run logging.

A run simulates a human-in-the-loop review. The assessor answers from the
training standard qrels; effectiveness is always judged later against a
gold standard, which may differ. Each strategy produces a ReviewLog, the
ordered record of every assessment made.

Strategies:

* AUTOTAR: starts from a single seed presumed relevant, augments every
  training round with randomly drawn unreviewed documents temporarily
  labeled non-relevant, reviews the top scoring batch, and grows the
  batch size by ceil(B / growth_divisor) each round.
* CAL: reviews a seed set of top BM25 hits for the topic query, then
  repeatedly trains on everything reviewed and reviews the next
  top-scoring batch.
* SAL: same seed set, then uncertainty sampling (smallest |score|) until
  the training size cap, then one final model ranks the remainder.
* SPL: reviews a uniform random training sample, trains once, and ranks
  the remainder.

Randomness comes only from streams derived from (rng_seed, topic_id,
method, purpose, iteration), so runs are reproducible document by document
under any execution order.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

from ._rng import derive_rng
from .classifier import SingleClassError, train_arrays
from .corpus import Topic, _validate_identifier
from .search import InvertedIndex, bm25_rank
from .vectors import SparseVector, VectorizedCorpus, rows_to_csr

logger = logging.getLogger(__name__)

STALLED_REVIEW_THRESHOLD = 1000


class Method(str, Enum):
    AUTOTAR = "AUTOTAR"
    CAL = "CAL"
    SAL = "SAL"
    SPL = "SPL"


class SeedMode(str, Enum):
    BM25 = "BM25"
    RANDOM_RELEVANT = "RANDOM_RELEVANT"
    SYNTHETIC = "SYNTHETIC"
    EXPLICIT = "EXPLICIT"


class EngineError(Exception):
    pass


class SeedSelectionError(EngineError):
    pass


class StalledRunError(EngineError):
    """The strategy cannot proceed (for example, no relevant seed hits)."""

    def __init__(self, message: str, log: "ReviewLog | None" = None):
        super().__init__(message)
        self.log = log


class Qrels:
    """Binary relevance assessments keyed by topic and document."""

    def __init__(self, data: Mapping[str, Mapping[str, int]] | None = None):
        self._data: dict[str, dict[str, int]] = {}
        if data:
            for topic, labels in data.items():
                for doc, label in labels.items():
                    self.add(topic, doc, label)

    def add(self, topic_id: str, doc_id: str, label: int) -> None:
        if label not in (0, 1):
            raise ValueError(f"qrels labels are 0 or 1, got {label!r}")
        _validate_identifier(topic_id, "qrels topic")
        _validate_identifier(doc_id, "qrels doc")
        self._data.setdefault(topic_id, {})[doc_id] = label

    def topics(self) -> list[str]:
        return sorted(self._data)

    def __contains__(self, topic_id: str) -> bool:
        return topic_id in self._data

    def labels(self, topic_id: str) -> Mapping[str, int]:
        return self._data[topic_id]

    def relevant(self, topic_id: str) -> frozenset[str]:
        return frozenset(
            d for d, v in self._data.get(topic_id, {}).items() if v == 1
        )

    def is_relevant(self, topic_id: str, doc_id: str) -> bool:
        return self._data.get(topic_id, {}).get(doc_id, 0) == 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Qrels):
            return NotImplemented
        return self._data == other._data


def read_qrels(path) -> Qrels:
    """Parse TREC qrels lines: topic 0 doc_id {0|1}."""
    qrels = Qrels()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(
                    f"{path}: line {lineno}: expected 'topic 0 doc_id label'"
                )
            topic_id, _unused, doc_id, label_s = parts
            if label_s not in ("0", "1"):
                raise ValueError(
                    f"{path}: line {lineno}: label must be 0 or 1, got {label_s!r}"
                )
            qrels.add(topic_id, doc_id, int(label_s))
    return qrels


def write_qrels(qrels: Qrels, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for topic_id in qrels.topics():
            labels = qrels.labels(topic_id)
            for doc_id in sorted(labels):
                fh.write(f"{topic_id} 0 {doc_id} {labels[doc_id]}\n")


def assess(qrels: Qrels, topic_id: str, doc_id: str) -> int:
    """Simulated assessor: +1 if the standard marks the document relevant."""
    return 1 if qrels.is_relevant(topic_id, doc_id) else -1


@dataclass(frozen=True)
class RunConfig:
    method: Method
    seed_mode: SeedMode = SeedMode.BM25
    effort_budget: int = 1000
    rng_seed: int = 0
    explicit_seed: str | None = None
    presumptive_count: int = 100
    initial_batch: int = 1
    growth_divisor: int = 10
    cal_batch: int = 1000
    sal_spl_training_size: int = 5000
    classifier_tol: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "seed_mode", SeedMode(self.seed_mode))
        for name in (
            "effort_budget",
            "presumptive_count",
            "initial_batch",
            "growth_divisor",
            "cal_batch",
            "sal_spl_training_size",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.seed_mode is SeedMode.EXPLICIT and not self.explicit_seed:
            raise ValueError("EXPLICIT seed mode requires explicit_seed")


@dataclass(frozen=True)
class LogEntry:
    doc_id: str
    assessor_label: int
    iteration: int
    batch_size: int


@dataclass
class ReviewLog:
    topic_id: str
    method: Method
    seed_mode: SeedMode
    config: RunConfig
    seed_doc_id: str | None = None
    entries: list[LogEntry] = field(default_factory=list)
    stalled_warning: bool = False

    def __len__(self) -> int:
        return len(self.entries)

    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]

    @property
    def relevant_found(self) -> int:
        return sum(1 for e in self.entries if e.assessor_label == 1)


@dataclass(frozen=True)
class Seed:
    mode: SeedMode
    doc_id: str | None = None
    row: int | None = None
    vector: SparseVector | None = None

    @property
    def counts_effort(self) -> bool:
        return self.row is not None


def select_seed(
    config: RunConfig,
    vc: VectorizedCorpus,
    topic: Topic,
    training_qrels: Qrels,
    index: InvertedIndex | None = None,
) -> Seed:
    """Resolve the configured seed mode to a document row or pseudo-vector."""
    mode = config.seed_mode
    if mode is SeedMode.BM25:
        if index is None:
            raise SeedSelectionError("BM25 seeding requires an inverted index")
        result = bm25_rank(topic.seed_query, index, k=index.n_documents)
        if result.vacuous:
            raise SeedSelectionError(
                f"topic {topic.topic_id}: seed query has no indexed terms"
            )
        # The simulated user walks down the ad hoc ranking and keeps the
        # first hit the training standard marks relevant.
        for doc_id, _score in result.hits:
            if training_qrels.is_relevant(topic.topic_id, doc_id):
                return Seed(mode, doc_id=doc_id, row=vc.row_of[doc_id])
        raise SeedSelectionError(
            f"topic {topic.topic_id}: the seed query ranking contains no "
            "relevant document; reformulate the query"
        )
    if mode is SeedMode.RANDOM_RELEVANT:
        rows = sorted(
            vc.row_of[d]
            for d in training_qrels.relevant(topic.topic_id)
            if d in vc.row_of
        )
        if not rows:
            raise SeedSelectionError(
                f"topic {topic.topic_id}: no relevant documents to seed from"
            )
        rng = derive_rng(
            config.rng_seed, topic.topic_id, config.method.value, "seed"
        )
        row = rows[int(rng.integers(len(rows)))]
        return Seed(mode, doc_id=vc.doc_ids[row], row=row)
    if mode is SeedMode.SYNTHETIC:
        from .vectors import vectorize_text

        vec = vectorize_text(topic.description, vc.vocabulary)
        if len(vec) == 0:
            raise SeedSelectionError(
                f"topic {topic.topic_id}: synthetic seed text has no "
                "vocabulary terms"
            )
        return Seed(mode, vector=vec)
    if mode is SeedMode.EXPLICIT:
        doc_id = config.explicit_seed
        if doc_id not in vc.row_of:
            raise SeedSelectionError(
                f"explicit seed {doc_id!r} is not in the collection"
            )
        return Seed(mode, doc_id=doc_id, row=vc.row_of[doc_id])
    raise SeedSelectionError(f"unsupported seed mode {mode!r}")


class _RunState:
    def __init__(
        self,
        config: RunConfig,
        vc: VectorizedCorpus,
        topic: Topic,
        training_qrels: Qrels,
    ):
        self.config = config
        self.vc = vc
        self.topic = topic
        self.qrels = training_qrels
        self.budget = min(config.effort_budget, len(vc))
        self.reviewed = np.zeros(len(vc), dtype=bool)
        self.log = ReviewLog(
            topic_id=topic.topic_id,
            method=config.method,
            seed_mode=config.seed_mode,
            config=config,
        )
        self.train_rows: list[int] = []
        self.train_labels: list[int] = []
        self.seed_vector: SparseVector | None = None

    @property
    def remaining_budget(self) -> int:
        return self.budget - len(self.log.entries)

    def unreviewed_rows(self) -> np.ndarray:
        return np.flatnonzero(~self.reviewed)

    def review(self, rows: Iterable[int], iteration: int, batch_size: int) -> None:
        for row in rows:
            doc_id = self.vc.doc_ids[row]
            label = assess(self.qrels, self.topic.topic_id, doc_id)
            self.log.entries.append(
                LogEntry(doc_id, label, iteration, batch_size)
            )
            self.reviewed[row] = True
            self.train_rows.append(row)
            self.train_labels.append(label)
            if (
                not self.log.stalled_warning
                and len(self.log.entries) >= STALLED_REVIEW_THRESHOLD
                and self.log.relevant_found == 0
            ):
                self.log.stalled_warning = True
                logger.warning(
                    "topic %s: %d documents reviewed with no relevant "
                    "document found; the run continues to its budget",
                    self.topic.topic_id,
                    len(self.log.entries),
                )

    def training_matrix(
        self, extra_rows: np.ndarray | None = None
    ) -> tuple[sparse.csr_matrix, np.ndarray]:
        """Stack [synthetic seed?, reviewed docs, extra rows as -1]."""
        blocks = []
        labels: list[int] = []
        if self.seed_vector is not None:
            blocks.append(
                rows_to_csr([self.seed_vector], self.vc.n_features)
            )
            labels.append(1)
        if self.train_rows:
            blocks.append(self.vc.matrix[np.asarray(self.train_rows)])
            labels.extend(self.train_labels)
        if extra_rows is not None and extra_rows.size:
            blocks.append(self.vc.matrix[extra_rows])
            labels.extend([-1] * extra_rows.size)
        matrix = sparse.vstack(blocks, format="csr") if len(blocks) > 1 else blocks[0]
        return matrix, np.asarray(labels, dtype=np.float64)

    def train(self, extra_rows: np.ndarray | None = None):
        matrix, labels = self.training_matrix(extra_rows)
        return train_arrays(
            matrix, labels, c="auto", tol=self.config.classifier_tol
        )


def _top_by_score(
    scores: np.ndarray,
    candidates: np.ndarray,
    doc_id_array: np.ndarray,
    k: int,
) -> np.ndarray:
    """Highest scoring candidate rows; ties break by ascending doc_id."""
    order = np.lexsort((doc_id_array[candidates], -scores[candidates]))
    return candidates[order[:k]]


def _most_uncertain(
    scores: np.ndarray,
    candidates: np.ndarray,
    doc_id_array: np.ndarray,
    k: int,
) -> np.ndarray:
    order = np.lexsort((doc_id_array[candidates], np.abs(scores[candidates])))
    return candidates[order[:k]]


def _grow_batch(b: int, divisor: int) -> int:
    return b + math.ceil(b / divisor)


def autotar_run(
    config: RunConfig,
    vc: VectorizedCorpus,
    topic: Topic,
    training_qrels: Qrels,
    index: InvertedIndex | None = None,
) -> ReviewLog:
    """Continuous learning from a single seed with presumptive negatives.

    The seed enters the training set labeled relevant whether or not the
    assessor agrees; the log records the actual assessment. Each round
    temporarily adds presumptive_count unreviewed documents labeled -1,
    trains, reviews the top batch, and grows the batch size.
    """
    state = _RunState(config, vc, topic, training_qrels)
    seed = select_seed(config, vc, topic, training_qrels, index)
    state.log.seed_doc_id = seed.doc_id
    if seed.row is not None:
        doc_id = vc.doc_ids[seed.row]
        label = assess(training_qrels, topic.topic_id, doc_id)
        state.log.entries.append(LogEntry(doc_id, label, 0, 1))
        state.reviewed[seed.row] = True
        # The seed is presumed relevant for training purposes.
        state.train_rows.append(seed.row)
        state.train_labels.append(1)
    else:
        state.seed_vector = seed.vector

    batch = config.initial_batch
    iteration = 1
    while state.remaining_budget > 0:
        unreviewed = state.unreviewed_rows()
        if unreviewed.size == 0:
            break
        n_presumptive = min(config.presumptive_count, unreviewed.size)
        rng = derive_rng(
            config.rng_seed,
            topic.topic_id,
            config.method.value,
            "presumptive",
            iteration,
        )
        presumptive = np.sort(
            rng.choice(unreviewed, size=n_presumptive, replace=False)
        )
        model = state.train(extra_rows=presumptive)
        scores = model.score_matrix(vc.matrix)
        take = min(batch, state.remaining_budget, unreviewed.size)
        chosen = _top_by_score(scores, unreviewed, vc.doc_id_array, take)
        state.review(chosen, iteration, take)
        batch = _grow_batch(batch, config.growth_divisor)
        iteration += 1
    return state.log


def _review_bm25_seed_set(
    state: _RunState, index: InvertedIndex
) -> None:
    config, topic = state.config, state.topic
    result = bm25_rank(topic.seed_query, index, k=config.cal_batch)
    if result.vacuous:
        raise StalledRunError(
            f"topic {topic.topic_id}: seed query has no indexed terms",
            log=state.log,
        )
    if not result.hits:
        raise StalledRunError(
            f"topic {topic.topic_id}: seed query matches no documents",
            log=state.log,
        )
    rows = [state.vc.row_of[d] for d, _ in result.hits]
    rows = rows[: state.remaining_budget]
    state.review(rows, 0, len(rows))
    if state.log.relevant_found == 0:
        raise StalledRunError(
            f"topic {topic.topic_id}: seed set of {len(rows)} documents "
            "contains no relevant document",
            log=state.log,
        )


def _train_reviewed(state: _RunState):
    try:
        return state.train()
    except SingleClassError as exc:
        raise StalledRunError(
            f"topic {state.topic.topic_id}: reviewed documents are all of "
            f"one class ({exc})",
            log=state.log,
        ) from exc


def cal_run(
    config: RunConfig,
    vc: VectorizedCorpus,
    topic: Topic,
    training_qrels: Qrels,
    index: InvertedIndex,
) -> ReviewLog:
    """Continuous learning from a BM25 seed set, top-batch review rounds."""
    state = _RunState(config, vc, topic, training_qrels)
    _review_bm25_seed_set(state, index)
    iteration = 1
    while state.remaining_budget > 0:
        unreviewed = state.unreviewed_rows()
        if unreviewed.size == 0:
            break
        model = _train_reviewed(state)
        scores = model.score_matrix(vc.matrix)
        take = min(config.cal_batch, state.remaining_budget, unreviewed.size)
        chosen = _top_by_score(scores, unreviewed, vc.doc_id_array, take)
        state.review(chosen, iteration, take)
        iteration += 1
    return state.log


def sal_run(
    config: RunConfig,
    vc: VectorizedCorpus,
    topic: Topic,
    training_qrels: Qrels,
    index: InvertedIndex,
) -> ReviewLog:
    """Uncertainty sampling to a fixed training size, then one ranking."""
    state = _RunState(config, vc, topic, training_qrels)
    _review_bm25_seed_set(state, index)
    iteration = 1
    while (
        len(state.log.entries) < config.sal_spl_training_size
        and state.remaining_budget > 0
    ):
        unreviewed = state.unreviewed_rows()
        if unreviewed.size == 0:
            break
        model = _train_reviewed(state)
        scores = model.score_matrix(vc.matrix)
        take = min(
            config.cal_batch,
            config.sal_spl_training_size - len(state.log.entries),
            state.remaining_budget,
            unreviewed.size,
        )
        chosen = _most_uncertain(scores, unreviewed, vc.doc_id_array, take)
        state.review(chosen, iteration, take)
        iteration += 1
    unreviewed = state.unreviewed_rows()
    if state.remaining_budget > 0 and unreviewed.size > 0:
        model = _train_reviewed(state)
        scores = model.score_matrix(vc.matrix)
        take = min(state.remaining_budget, unreviewed.size)
        chosen = _top_by_score(scores, unreviewed, vc.doc_id_array, take)
        state.review(chosen, iteration, take)
    return state.log


def spl_run(
    config: RunConfig,
    vc: VectorizedCorpus,
    topic: Topic,
    training_qrels: Qrels,
    index: InvertedIndex | None = None,
) -> ReviewLog:
    """Uniform random training sample, one model, one ranking pass."""
    state = _RunState(config, vc, topic, training_qrels)
    rng = derive_rng(
        config.rng_seed, topic.topic_id, config.method.value, "sample"
    )
    n_sample = min(config.sal_spl_training_size, len(vc))
    sample = rng.choice(len(vc), size=n_sample, replace=False)
    to_review = sample[: state.remaining_budget]
    state.review(to_review, 0, len(to_review))
    unreviewed = state.unreviewed_rows()
    if state.remaining_budget > 0 and unreviewed.size > 0:
        model = _train_reviewed(state)
        scores = model.score_matrix(vc.matrix)
        take = min(state.remaining_budget, unreviewed.size)
        chosen = _top_by_score(scores, unreviewed, vc.doc_id_array, take)
        state.review(chosen, 1, take)
    return state.log


_RUNNERS = {
    Method.AUTOTAR: autotar_run,
    Method.CAL: cal_run,
    Method.SAL: sal_run,
    Method.SPL: spl_run,
}


def run_method(
    config: RunConfig,
    vc: VectorizedCorpus,
    topic: Topic,
    training_qrels: Qrels,
    index: InvertedIndex | None = None,
) -> ReviewLog:
    """Dispatch to the configured review strategy."""
    if len(vc) < 2:
        raise EngineError(
            f"a review run needs at least two documents, got {len(vc)}"
        )
    if topic.topic_id not in training_qrels:
        raise EngineError(
            f"topic {topic.topic_id} has no training standard assessments"
        )
    runner = _RUNNERS[Method(config.method)]
    if runner in (cal_run, sal_run):
        if index is None:
            raise EngineError(f"{config.method.value} requires an inverted index")
        return runner(config, vc, topic, training_qrels, index)
    return runner(config, vc, topic, training_qrels, index)


REVIEW_LOG_HEADER = "rank,doc_id,assessor_label,gold_label,iteration,batch_size"


def write_review_log(
    log: ReviewLog,
    path,
    gold_qrels: Qrels | None = None,
    provenance: Mapping[str, object] | None = None,
) -> None:
    """Write the CSV, led by a manifest comment, atomically."""
    manifest = run_manifest(log, provenance)
    gold = gold_qrels
    lines = [f"# manifest: {json.dumps(manifest, sort_keys=True)}"]
    lines.append(REVIEW_LOG_HEADER)
    for rank, e in enumerate(log.entries, start=1):
        if gold is not None:
            gold_label = 1 if gold.is_relevant(log.topic_id, e.doc_id) else -1
        else:
            gold_label = e.assessor_label
        lines.append(
            f"{rank},{e.doc_id},{e.assessor_label},{gold_label},"
            f"{e.iteration},{e.batch_size}"
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")


def run_manifest(
    log: ReviewLog, provenance: Mapping[str, object] | None = None
) -> dict:
    config = log.config
    manifest = {
        "topic_id": log.topic_id,
        "method": log.method.value,
        "seed_mode": log.seed_mode.value,
        "seed_doc_id": log.seed_doc_id,
        "rng_seed": config.rng_seed,
        "effort_budget": config.effort_budget,
        "realized_reviews": len(log.entries),
        "relevant_found": log.relevant_found,
        "stalled_warning": log.stalled_warning,
        "presumptive_count": config.presumptive_count,
        "initial_batch": config.initial_batch,
        "growth_divisor": config.growth_divisor,
        "cal_batch": config.cal_batch,
        "sal_spl_training_size": config.sal_spl_training_size,
    }
    if provenance:
        manifest.update(provenance)
    return manifest


def read_review_log(path) -> tuple[ReviewLog, dict[str, int], dict]:
    """Read a review log CSV back into (log, gold labels, manifest)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    manifest: dict = {}
    idx = 0
    while idx < len(lines) and lines[idx].startswith("#"):
        if lines[idx].startswith("# manifest:"):
            manifest = json.loads(lines[idx][len("# manifest:"):])
        idx += 1
    if idx >= len(lines) or lines[idx] != REVIEW_LOG_HEADER:
        raise ValueError(f"{path}: missing review log header")
    entries = []
    gold_labels: dict[str, int] = {}
    for lineno, line in enumerate(lines[idx + 1 :], start=idx + 2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise ValueError(f"{path}: line {lineno}: expected 6 fields")
        rank_s, doc_id, assessor_s, gold_s, iteration_s, batch_s = parts
        entries.append(
            LogEntry(doc_id, int(assessor_s), int(iteration_s), int(batch_s))
        )
        gold_labels[doc_id] = int(gold_s)
        if int(rank_s) != len(entries):
            raise ValueError(f"{path}: line {lineno}: rank out of sequence")
    config = RunConfig(
        method=Method(manifest.get("method", "AUTOTAR")),
        seed_mode=SeedMode(manifest.get("seed_mode", "BM25")),
        effort_budget=int(manifest.get("effort_budget", max(1, len(entries)))),
        rng_seed=int(manifest.get("rng_seed", 0)),
        explicit_seed=manifest.get("explicit_seed") or manifest.get("seed_doc_id"),
        presumptive_count=int(manifest.get("presumptive_count", 100)),
        initial_batch=int(manifest.get("initial_batch", 1)),
        growth_divisor=int(manifest.get("growth_divisor", 10)),
        cal_batch=int(manifest.get("cal_batch", 1000)),
        sal_spl_training_size=int(manifest.get("sal_spl_training_size", 5000)),
    )
    log = ReviewLog(
        topic_id=manifest.get("topic_id", ""),
        method=config.method,
        seed_mode=config.seed_mode,
        config=config,
        seed_doc_id=manifest.get("seed_doc_id"),
        entries=entries,
        stalled_warning=bool(manifest.get("stalled_warning", False)),
    )
    return log, gold_labels, manifest


def _atomic_write_text(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)
