#!/usr/bin/env python3
"""Macro-averaged F1 on the RCV1-v2 benchmark splits.

Expects a directory with the published LYRL2004 distribution files:

    lyrl2004_tokens_train.dat
    lyrl2004_tokens_test_pt0.dat ... lyrl2004_tokens_test_pt3.dat
    rcv1-v2.topics.qrels

Token files are already stemmed and stopped; each document is

    .I <docid>
    .W
    <token lines>
    <blank line>

The recipe: ltc vectors with document frequencies taken from the
training split, one linear classifier per topic trained on the 23,149
training documents, prediction at score >= 0 over the 781,265 test
documents, then F1 per topic and the macro average over topics with at
least one positive training example. Training all 103 topics with the
package solver is compute-heavy (hours on one core); use --topic to
subset while smoke-testing.

Usage:
    python3 scripts/rcv1_benchmark.py --rcv1-dir /data/rcv1 --out rcv1_f1.csv
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from collections import Counter
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from tarbench.classifier import AUTO_C, train_arrays
from tarbench.corpus import TermStats, Vocabulary
from tarbench.metrics import INDETERMINATE, f1_score, macro_f1
from tarbench.vectors import ltc_weights, rows_to_csr

TRAIN_FILE = "lyrl2004_tokens_train.dat"
TEST_FILES = [f"lyrl2004_tokens_test_pt{i}.dat" for i in range(4)]
QRELS_FILE = "rcv1-v2.topics.qrels"


def iter_token_docs(path):
    """Yield (doc_id, token Counter) from a LYRL2004 token file."""
    doc_id = None
    counts: Counter[str] = Counter()
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line.startswith(".I"):
                if doc_id is not None:
                    yield doc_id, counts
                doc_id = line.split()[1]
                counts = Counter()
            elif line == ".W" or not line:
                continue
            else:
                counts.update(line.split())
    if doc_id is not None:
        yield doc_id, counts


def read_topic_assignments(path):
    """Topic -> set of doc ids from the qrels distribution file."""
    topics: dict[str, set[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            topic, doc_id = parts[0], parts[1]
            topics.setdefault(topic, set()).add(doc_id)
    return topics


def build_training_vocabulary(train_docs):
    df: Counter[str] = Counter()
    cf: Counter[str] = Counter()
    for _, counts in train_docs:
        df.update(counts.keys())
        for term, tf in counts.items():
            cf[term] += tf
    terms = {
        term: TermStats(fid, cf[term], df[term])
        for fid, term in enumerate(sorted(df))
    }
    return Vocabulary(n_documents=len(train_docs), terms=terms)


def evaluate(rcv1_dir, tol: float = 1e-4, topics=None, progress=print):
    root = Path(rcv1_dir)
    for name in [TRAIN_FILE, QRELS_FILE] + TEST_FILES:
        if not (root / name).is_file():
            raise FileNotFoundError(f"{root / name} is missing")

    progress("reading training split")
    train_docs = list(iter_token_docs(root / TRAIN_FILE))
    vocabulary = build_training_vocabulary(train_docs)
    train_ids = [doc_id for doc_id, _ in train_docs]
    rows = [ltc_weights(counts, vocabulary) for _, counts in train_docs]
    matrix = rows_to_csr(rows, len(vocabulary))
    progress(
        f"{len(train_ids)} training documents, {len(vocabulary)} terms"
    )

    assignments = read_topic_assignments(root / QRELS_FILE)
    train_id_set = set(train_ids)
    wanted = sorted(topics) if topics else sorted(assignments)
    active = [
        t for t in wanted if assignments.get(t) and assignments[t] & train_id_set
    ]

    weights = np.zeros((len(active), len(vocabulary)))
    biases = np.zeros(len(active))
    for row, topic in enumerate(active):
        positives = assignments[topic]
        y = np.fromiter(
            (1.0 if d in positives else -1.0 for d in train_ids),
            dtype=np.float64,
            count=len(train_ids),
        )
        started = time.perf_counter()
        model = train_arrays(matrix, y, c=AUTO_C, tol=tol)
        weights[row] = model.weights
        biases[row] = model.bias
        progress(
            f"trained {topic} ({int(np.sum(y > 0))} positives, "
            f"{time.perf_counter() - started:.0f}s)"
        )

    tp = np.zeros(len(active), dtype=np.int64)
    fp = np.zeros(len(active), dtype=np.int64)
    fn = np.zeros(len(active), dtype=np.int64)
    positives_by_row = [assignments[t] for t in active]
    n_test = 0
    for name in TEST_FILES:
        progress(f"scoring {name}")
        for doc_id, counts in iter_token_docs(root / name):
            n_test += 1
            vec = ltc_weights(counts, vocabulary)
            if len(vec):
                fids = np.asarray(vec.feature_ids, dtype=np.intp)
                vals = np.asarray(vec.weights)
                scores = weights[:, fids] @ vals + biases
            else:
                scores = biases
            predicted = scores >= 0.0
            for row, positives in enumerate(positives_by_row):
                actual = doc_id in positives
                if predicted[row] and actual:
                    tp[row] += 1
                elif predicted[row]:
                    fp[row] += 1
                elif actual:
                    fn[row] += 1

    per_topic = {}
    counts = []
    for row, topic in enumerate(active):
        triple = (int(tp[row]), int(fp[row]), int(fn[row]))
        counts.append(triple)
        value = f1_score(*triple)
        per_topic[topic] = None if value is INDETERMINATE else value
    macro = macro_f1(counts)
    return SimpleNamespace(
        macro_f1=macro.value,
        n_topics=macro.n_classes,
        n_excluded=macro.n_excluded,
        n_test_documents=n_test,
        per_topic=per_topic,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--rcv1-dir",
        default=os.environ.get("TARBENCH_RCV1_DIR"),
        help="directory holding the LYRL2004 files",
    )
    parser.add_argument("--tol", type=float, default=1e-4)
    parser.add_argument(
        "--topic", action="append", help="restrict to this topic (repeatable)"
    )
    parser.add_argument("--out", help="write per-topic F1 rows to this CSV")
    args = parser.parse_args(argv)
    if not args.rcv1_dir:
        parser.error("--rcv1-dir or TARBENCH_RCV1_DIR is required")

    result = evaluate(args.rcv1_dir, tol=args.tol, topics=args.topic)
    if args.out:
        lines = ["topic,f1"]
        for topic in sorted(result.per_topic):
            value = result.per_topic[topic]
            lines.append(f"{topic},{'' if value is None else f'{value:.6f}'}")
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(
        f"macro_f1={result.macro_f1:.4f} over {result.n_topics} topics "
        f"({result.n_excluded} excluded, {result.n_test_documents} test documents)"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
