"""Command line interface.

Exit codes: 0 success, 1 input validation failure, 2 run or evaluation
failure, 3 stalled-run warning escalated by --strict. Operational errors
are reported to stderr as single-line JSON records with "error" and
"message" fields so callers can parse failures without scraping text.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .corpus import CorpusFormatError, read_corpus, read_topics
from .engine import (
    EngineError,
    Method,
    Qrels,
    ReviewLog,
    RunConfig,
    SeedMode,
    read_qrels,
    read_review_log,
    run_method,
    select_seed,
    write_review_log,
)
from .metrics import (
    RecallNotAchievedError,
    default_effort_grid,
    differential_points,
    gain_curve,
    recall_effort,
    sign_test,
)
from .testbed import SyntheticSpec, generate, write_testbed
from .vectors import dump_vectors
from .workspace import WorkspaceError, create_workspace, load_workspace

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_STRICT = 3

DEFAULT_TARGETS = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.75,0.8,0.9"
_DECILES = tuple(d / 10 for d in range(1, 10))

_REPORTABLE = (
    CorpusFormatError,
    EngineError,
    WorkspaceError,
    RecallNotAchievedError,
    FileNotFoundError,
    IsADirectoryError,
    NotADirectoryError,
    PermissionError,
    ValueError,
)


def _report_error(exc: Exception, **context) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    record.update(context)
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def _write_csv(path: Path, manifest: dict, header: str, rows: list[str]) -> None:
    lines = [f"# manifest: {json.dumps(manifest, sort_keys=True)}", header]
    lines.extend(rows)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tmp.replace(path)


def _sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_ingest(args) -> int:
    try:
        corpus = read_corpus(args.corpus, args.format)
        ws = create_workspace(
            args.workspace,
            corpus,
            source=Path(args.corpus).name,
            min_collection_frequency=args.min_collection_frequency,
        )
        if args.vector_dump:
            dump_vectors(
                (
                    (doc_id, ws.vc.row_vector(i))
                    for i, doc_id in enumerate(ws.vc.doc_ids)
                ),
                args.vector_dump,
                digits=9,
            )
    except _REPORTABLE as exc:
        _report_error(exc)
        return EXIT_VALIDATION
    print(
        f"ingested {len(ws.vc)} documents, "
        f"vocabulary {len(ws.vocabulary)} terms -> {ws.directory}"
    )
    return EXIT_OK


def _run_config_from_args(args) -> RunConfig:
    return RunConfig(
        method=Method(args.method),
        seed_mode=SeedMode(args.seed_mode),
        effort_budget=args.effort_budget,
        rng_seed=args.rng_seed,
        explicit_seed=args.explicit_seed,
        presumptive_count=args.presumptive_count,
        initial_batch=args.initial_batch,
        growth_divisor=args.growth_divisor,
        cal_batch=args.cal_batch,
        sal_spl_training_size=args.sal_spl_training_size,
    )


def cmd_run(args) -> int:
    try:
        ws = load_workspace(args.workspace)
        topics = read_topics(args.topics)
        if args.topic:
            wanted = set(args.topic)
            unknown = wanted - {t.topic_id for t in topics}
            if unknown:
                raise ValueError(f"unknown topics requested: {sorted(unknown)}")
            topics = [t for t in topics if t.topic_id in wanted]
        if not topics:
            raise ValueError("no topics to run")
        training = read_qrels(args.qrels)
        gold = read_qrels(args.gold_qrels) if args.gold_qrels else None
        config = _run_config_from_args(args)
        provenance = {
            "corpus_sha256": ws.manifest["checksums"]["corpus.tsv"],
            "n_documents": ws.manifest["n_documents"],
            "vocabulary_size": ws.manifest["vocabulary_size"],
            "training_qrels_sha256": _sha256_file(args.qrels),
        }
        if args.gold_qrels:
            provenance["gold_qrels_sha256"] = _sha256_file(args.gold_qrels)
    except _REPORTABLE as exc:
        _report_error(exc)
        return EXIT_VALIDATION

    out_dir = Path(args.out) if args.out else ws.directory / "runs"
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(topic) -> ReviewLog:
        return run_method(config, ws.vc, topic, training, ws.index)

    results: list[tuple[str, ReviewLog | Exception]] = []
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            futures = [(t.topic_id, pool.submit(one, t)) for t in topics]
            for topic_id, fut in futures:
                try:
                    results.append((topic_id, fut.result()))
                except Exception as exc:
                    results.append((topic_id, exc))
    else:
        for t in topics:
            try:
                results.append((t.topic_id, one(t)))
            except Exception as exc:
                results.append((t.topic_id, exc))

    failed = 0
    stalled = 0
    for topic_id, result in results:
        if isinstance(result, Exception):
            if not isinstance(result, _REPORTABLE):
                raise result
            _report_error(result, topic_id=topic_id)
            failed += 1
            continue
        path = out_dir / f"{topic_id}_{config.method.value}.csv"
        write_review_log(result, path, gold_qrels=gold, provenance=provenance)
        if result.stalled_warning:
            stalled += 1
        print(
            f"{topic_id} {config.method.value} reviews={len(result)} "
            f"relevant_found={result.relevant_found} "
            f"stalled_warning={str(result.stalled_warning).lower()} -> {path}"
        )
    if failed:
        return EXIT_RUNTIME
    if stalled and args.strict:
        return EXIT_STRICT
    return EXIT_OK


def cmd_seed(args) -> int:
    try:
        ws = load_workspace(args.workspace)
        topics = read_topics(args.topics)
        training = read_qrels(args.qrels)
        config = RunConfig(
            method=Method(args.method),
            seed_mode=SeedMode(args.seed_mode),
            rng_seed=args.rng_seed,
            explicit_seed=args.explicit_seed,
        )
    except _REPORTABLE as exc:
        _report_error(exc)
        return EXIT_VALIDATION
    failed = 0
    for topic in topics:
        try:
            seed = select_seed(config, ws.vc, topic, training, ws.index)
        except _REPORTABLE as exc:
            _report_error(exc, topic_id=topic.topic_id)
            failed += 1
            continue
        print(
            json.dumps(
                {
                    "topic_id": topic.topic_id,
                    "seed_mode": config.seed_mode.value,
                    "seed_doc_id": seed.doc_id,
                    "counts_effort": seed.counts_effort,
                },
                sort_keys=True,
            )
        )
    return EXIT_RUNTIME if failed else EXIT_OK


def _load_logs(paths) -> list[tuple[ReviewLog, dict]]:
    out = []
    for p in paths:
        log, _gold, manifest = read_review_log(p)
        out.append((log, manifest))
    return out


def cmd_eval(args) -> int:
    try:
        gold = read_qrels(args.gold_qrels)
        logs = _load_logs(args.log)
        targets = [float(x) for x in args.targets.split(",") if x]
        for t in targets:
            if not 0.0 < t <= 1.0:
                raise ValueError(f"recall target out of range: {t}")
    except _REPORTABLE as exc:
        _report_error(exc)
        return EXIT_VALIDATION
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    effort_rows = []
    grid_rows = []
    failed = 0
    for log, manifest in logs:
        topic_id = log.topic_id
        try:
            relevant = gold.relevant(topic_id)
            if not relevant:
                raise ValueError(
                    f"gold standard has no relevant documents for topic {topic_id}"
                )
            ordering = log.doc_ids()
            curve = gain_curve(ordering, relevant)
            base_manifest = {
                "kind": "gain-curve",
                "topic_id": topic_id,
                "method": log.method.value,
                "n_relevant": len(relevant),
                "n_reviewed": len(ordering),
                "source": manifest,
            }
            rows = [f"{k},{recall:.9g}" for k, recall in curve.points[1:]]
            _write_csv(
                out_dir / f"gain_{topic_id}_{log.method.value}.csv",
                base_manifest,
                "effort,recall",
                rows,
            )
            n_collection = int(manifest.get("n_documents", len(ordering)))
            for k in default_effort_grid(n_collection, curve):
                grid_rows.append(
                    f"{topic_id},{log.method.value},{k},"
                    f"{curve.recall_at_effort(k):.9g}"
                )
            for target in targets:
                try:
                    k = recall_effort(ordering, relevant, target)
                    effort_rows.append(
                        f"{topic_id},{log.method.value},{target:g},{k},yes,"
                        f"{curve.recall_at_effort(len(ordering)):.9g}"
                    )
                except RecallNotAchievedError as exc:
                    effort_rows.append(
                        f"{topic_id},{log.method.value},{target:g},,no,"
                        f"{exc.terminal_recall:.9g}"
                    )
            print(
                f"{topic_id} {log.method.value} reviews={len(ordering)} "
                f"terminal_recall={curve.recall_at_effort(len(ordering)):.4f}"
            )
        except _REPORTABLE as exc:
            _report_error(exc, topic_id=topic_id)
            failed += 1
    shared = {"kind": "eval-summary", "targets": targets}
    _write_csv(
        out_dir / "recall_effort.csv",
        shared,
        "topic_id,method,target,effort,achieved,terminal_recall",
        effort_rows,
    )
    _write_csv(
        out_dir / "recall_grid.csv",
        {"kind": "recall-grid"},
        "topic_id,method,effort,recall",
        grid_rows,
    )
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_compare(args) -> int:
    try:
        gold = read_qrels(args.gold_qrels)
        baseline = {log.topic_id: (log, man) for log, man in _load_logs(args.baseline)}
        subject = {log.topic_id: (log, man) for log, man in _load_logs(args.subject)}
        shared_topics = sorted(set(baseline) & set(subject))
        if not shared_topics:
            raise ValueError("baseline and subject share no topics")
    except _REPORTABLE as exc:
        _report_error(exc)
        return EXIT_VALIDATION
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outcome_rows = []
    signs = []
    failed = 0
    for topic_id in shared_topics:
        try:
            relevant = gold.relevant(topic_id)
            if not relevant:
                raise ValueError(
                    f"gold standard has no relevant documents for topic {topic_id}"
                )
            base_log, base_man = baseline[topic_id]
            subj_log, subj_man = subject[topic_id]
            base_order = base_log.doc_ids()
            subj_order = subj_log.doc_ids()
            base_curve = gain_curve(base_order, relevant)
            subj_curve = gain_curve(subj_order, relevant)
            n_collection = int(
                base_man.get("n_documents")
                or subj_man.get("n_documents")
                or max(len(base_order), len(subj_order), 1)
            )
            grid = default_effort_grid(n_collection, base_curve, subj_curve)
            points = differential_points(base_order, subj_order, relevant, grid)
            step = max(1, n_collection // 1000)
            crossings = sorted(
                set(grid) - set(range(step, grid[-1] + 1, step))
            )
            _write_csv(
                out_dir / f"differential_{topic_id}.csv",
                {
                    "kind": "differential",
                    "topic_id": topic_id,
                    "baseline_method": base_log.method.value,
                    "subject_method": subj_log.method.value,
                    "n_relevant": len(relevant),
                    "effort_step": step,
                    "effort_cap": grid[-1],
                    "decile_crossing_efforts": crossings,
                    "effort_semantics": (
                        "row i is the grid's i-th effort: multiples of "
                        "effort_step up to effort_cap, merged with the "
                        "decile crossings; exact integer review counts; an "
                        "ordering shorter than an effort contributes its "
                        "terminal recall"
                    ),
                },
                "baseline_recall,subject_recall",
                [
                    f"{p.baseline_recall:.9g},{p.subject_recall:.9g}"
                    for p in points
                ],
            )
            for target in _DECILES:
                base_k = base_curve.first_effort_at(target)
                subj_k = subj_curve.first_effort_at(target)
                if base_k == subj_k:
                    outcome, sign = "tie", 0
                elif subj_k is not None and (base_k is None or subj_k < base_k):
                    outcome, sign = "win", 1
                else:
                    outcome, sign = "loss", -1
                signs.append(sign)
                base_s = "" if base_k is None else str(base_k)
                subj_s = "" if subj_k is None else str(subj_k)
                outcome_rows.append(
                    f"{topic_id},{target:g},{base_s},{subj_s},{outcome}"
                )
        except _REPORTABLE as exc:
            _report_error(exc, topic_id=topic_id)
            failed += 1
    if signs:
        test = sign_test(signs)
        _write_csv(
            out_dir / "summary.csv",
            {
                "kind": "comparison-summary",
                "outcome_semantics": (
                    "subject wins a (topic, recall decile) pair when it "
                    "reaches the decile with less review effort"
                ),
                "wins": test.wins,
                "losses": test.losses,
                "ties": test.ties,
                "sign_test_p": test.p_value,
            },
            "topic_id,target,baseline_effort,subject_effort,outcome",
            outcome_rows,
        )
        print(
            f"topics={len(shared_topics) - failed} pairs={len(signs)} "
            f"subject_wins={test.wins} subject_losses={test.losses} "
            f"ties={test.ties} sign_test_p={test.p_value:.6g}"
        )
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_gen_testbed(args) -> int:
    try:
        spec = SyntheticSpec(
            n_documents=args.n,
            prevalence=args.prevalence,
            vocab_size=args.vocab_size,
            doc_length_mean=args.doc_length_mean,
            topical_term_count=args.topical_term_count,
            topical_mixing=args.topical_mixing,
            rng_seed=args.rng_seed,
            topical_rank_start=(
                None if args.disjoint_topical else args.topical_rank_start
            ),
        )
        bundle = generate(spec)
        manifest = write_testbed(bundle, args.out)
    except _REPORTABLE as exc:
        _report_error(exc)
        return EXIT_VALIDATION
    print(
        f"testbed {manifest['topic_id']}: {manifest['n_documents']} documents, "
        f"{manifest['n_relevant']} relevant -> {args.out}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tarbench",
        description="Simulated technology-assisted review runs and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a workspace from a corpus file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=["lines", "trec"], default="lines")
    p.add_argument("--workspace", required=True)
    p.add_argument("--min-collection-frequency", type=int, default=2)
    p.add_argument("--vector-dump", help="also write a 9-digit vector dump")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="execute review runs for topics")
    p.add_argument("--workspace", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--qrels", required=True, help="training standard qrels")
    p.add_argument("--gold-qrels", help="gold standard for the log's gold column")
    p.add_argument("--topic", action="append", help="restrict to this topic id")
    p.add_argument(
        "--method",
        required=True,
        choices=[m.value for m in Method],
    )
    p.add_argument(
        "--seed-mode",
        default=SeedMode.BM25.value,
        choices=[m.value for m in SeedMode],
    )
    p.add_argument("--explicit-seed")
    p.add_argument("--effort-budget", type=int, default=1000)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--presumptive-count", type=int, default=100)
    p.add_argument("--initial-batch", type=int, default=1)
    p.add_argument("--growth-divisor", type=int, default=10)
    p.add_argument("--cal-batch", type=int, default=1000)
    p.add_argument("--sal-spl-training-size", type=int, default=5000)
    p.add_argument("--out", help="run output directory (default workspace/runs)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument(
        "--strict",
        action="store_true",
        help="exit 3 when a run raises the stalled warning",
    )
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("seed", help="resolve seed documents without running")
    p.add_argument("--workspace", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument(
        "--seed-mode",
        default=SeedMode.BM25.value,
        choices=[m.value for m in SeedMode],
    )
    p.add_argument("--explicit-seed")
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument(
        "--method",
        default=Method.AUTOTAR.value,
        choices=[m.value for m in Method],
    )
    p.set_defaults(func=cmd_seed)

    p = sub.add_parser("eval", help="gain curves and recall-effort tables")
    p.add_argument("--log", required=True, nargs="+", help="review log CSVs")
    p.add_argument("--gold-qrels", required=True)
    p.add_argument("--targets", default=DEFAULT_TARGETS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="paired differential recall plots")
    p.add_argument("--baseline", required=True, nargs="+")
    p.add_argument("--subject", required=True, nargs="+")
    p.add_argument("--gold-qrels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-testbed", help="generate a synthetic collection")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--prevalence", type=float, required=True)
    p.add_argument("--vocab-size", type=int, default=1000)
    p.add_argument("--doc-length-mean", type=float, default=40.0)
    p.add_argument("--topical-term-count", type=int, default=20)
    p.add_argument("--topical-mixing", type=float, default=0.8)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--topical-rank-start", type=int, default=15)
    p.add_argument(
        "--disjoint-topical",
        action="store_true",
        help="draw topical terms from outside the background vocabulary",
    )
    p.set_defaults(func=cmd_gen_testbed)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; fold that into the validation
        # code and let --help keep its success status.
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001
        _report_error(exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
