"""Command-line interface: ingest, pool, run, evaluate, report.

Every subcommand exits non-zero on error and prints a single
"error: <ExceptionType>: <message>" line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import load_corpus
from .errors import GraphDpepError
from .icl import DEFAULT_KNN_K, DEFAULT_POOL_SIZE, build_pool
from .llm import DEFAULT_CONCURRENCY, HttpBackend, ReplayBackend, make_embedder
from .metrics import backend_judge, render_markdown
from .pipeline import (
    GROUP_CHOICES,
    STAGE_CHOICES,
    RunConfig,
    evaluate_run,
    run_pipeline,
)
from .relmeta import default_registry_path, load_registry


def _cmd_ingest(args: argparse.Namespace) -> int:
    registry = load_registry(args.relinfo or default_registry_path())
    corpus = load_corpus(
        train_path=args.train, dev_path=args.dev, test_path=args.test
    )
    stats: dict = {"relations": len(registry.non_na()), "splits": {}}
    for name in ("train", "dev", "test"):
        docs = corpus.split(name)
        if not docs and getattr(args, name) is None:
            continue
        n_trip = sum(len(d.gold) for d in docs)
        mean = n_trip / len(docs) if docs else 0.0
        stats["splits"][name] = {
            "docs": len(docs),
            "triplets": n_trip,
            "mean_triplets_per_doc": mean,
        }
        print(f"{name}: {len(docs)} docs, {n_trip} triplets, {mean:.2f} triplets/doc")
    print(f"relations: {stats['relations']}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "stats.json", "w", encoding="utf-8") as fh:
            json.dump(stats, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_pool(args: argparse.Namespace) -> int:
    corpus = load_corpus(train_path=args.corpus)
    embedder = make_embedder(
        args.embed_backend,
        base_url=args.endpoint,
        model=args.embed_model,
        seed=args.embed_seed,
    )
    pool = build_pool(
        corpus.train,
        embedder,
        knn_k=args.knn,
        pool_size=args.size,
        seed=args.seed,
    )
    pool.save(args.out)
    print(f"pool: {len(pool.doc_ids)} docs -> {args.out}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    overrides = {
        "corpus_test": args.corpus_test,
        "corpus_train": args.corpus_train,
        "registry": args.registry,
        "pool": args.pool,
        "backend_kind": args.backend,
        "endpoint": args.endpoint,
        "model": args.model,
        "replay": args.replay,
        "shots": args.shots,
        "group": args.group,
        "stage": args.stage,
        "concurrency": args.concurrency,
        "seed": args.seed,
        "out_dir": args.out,
    }
    if args.config:
        config = RunConfig.from_file(args.config, overrides)
    else:
        config = RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    artifacts = run_pipeline(config)
    with open(artifacts.metrics_path, "r", encoding="utf-8") as fh:
        metrics = json.load(fh)
    print(
        f"run: {artifacts.n_docs} docs ({artifacts.n_failed} failed), "
        f"micro_f1={metrics['micro']['f1']:.4f} -> {artifacts.out_dir}"
    )
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    manifest_path = Path(args.run) / "manifest.json"
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    config = RunConfig(**manifest["config"])
    if args.gold:
        config.corpus_test = args.gold
    judge = None
    if args.judge == "http":
        judge = backend_judge(HttpBackend(args.judge_endpoint), args.judge_model)
    elif args.judge == "replay":
        judge = backend_judge(ReplayBackend(args.judge_fixture), args.judge_model)
    report = evaluate_run(args.run, config, judge=judge)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    rows = []
    for run_dir in args.runs:
        with open(Path(run_dir) / "metrics.json", "r", encoding="utf-8") as fh:
            rows.append((Path(run_dir).name, json.load(fh)))
    if args.format == "json":
        print(json.dumps(dict(rows), indent=2, sort_keys=True))
    else:
        print(render_markdown(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphdpep",
        description="Few-shot document-level relation extraction pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate corpus splits and report statistics")
    p.add_argument("--train")
    p.add_argument("--dev")
    p.add_argument("--test")
    p.add_argument("--relinfo", help="relation metadata JSON (default: packaged)")
    p.add_argument("--out", help="directory to write stats.json")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("pool", help="build the demonstration pool from a train split")
    p.add_argument("--corpus", required=True, help="train split JSON")
    p.add_argument("--size", type=int, default=DEFAULT_POOL_SIZE)
    p.add_argument("--knn", type=int, default=DEFAULT_KNN_K)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embed-backend", choices=("hashmock", "http"), default="hashmock")
    p.add_argument("--endpoint", default="")
    p.add_argument("--embed-model", default="")
    p.add_argument("--embed-seed", type=int, default=0)
    p.add_argument("--out", required=True, help="pool JSON output path")
    p.set_defaults(func=_cmd_pool)

    p = sub.add_parser("run", help="execute the extraction pipeline")
    p.add_argument("--config", help="JSON config file; command-line flags win")
    p.add_argument("--corpus-test")
    p.add_argument("--corpus-train")
    p.add_argument("--registry")
    p.add_argument("--pool")
    p.add_argument("--backend", choices=("http", "replay"))
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--replay", help="replay fixture JSONL (backend=replay)")
    p.add_argument("--shots", type=int)
    p.add_argument("--group", choices=GROUP_CHOICES)
    p.add_argument("--stage", choices=STAGE_CHOICES)
    p.add_argument("--concurrency", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="run directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("evaluate", help="recompute metrics for an existing run")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--gold", help="override gold corpus path")
    p.add_argument("--judge", choices=("none", "http", "replay"), default="none")
    p.add_argument("--judge-endpoint", default="")
    p.add_argument("--judge-model", default="judge")
    p.add_argument("--judge-fixture", default="")
    p.add_argument("--out", help="optional path to save the report JSON")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="compare metrics across run directories")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--format", choices=("md", "json"), default="md")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GraphDpepError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # one-line reason, never a traceback
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
