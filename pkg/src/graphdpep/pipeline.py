"""End-to-end run orchestration and on-disk run artifacts.

A run walks three stages per document: per-relation decomposed extraction,
verification (defect pruning, outlier dropping, missing-pair detection), and
graph-ensemble fill-in for the pairs still missing. Generation requests are
the unit of concurrency and caching; parsing, verification and metrics are
single-threaded and ordered, so artifact bytes do not depend on concurrency.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

from . import corpus as corpus_mod
from .corpus import Corpus, Document, QueryPair, density_group, load_corpus, query_pairs
from .errors import GraphDpepError
from .extract import (
    STAGE_DECOMPOSED,
    Triplet,
    parse_generation,
    parse_mask_answer,
)
from .gog import association_subgraph, build_graph
from .icl import PrototypePool, build_pool, demos_for_type, demos_random
from .llm import (
    DEFAULT_CONCURRENCY,
    DEFAULT_MAX_NEW_TOKENS,
    DEFAULT_MAX_NEW_TOKENS_ENSEMBLE,
    DEFAULT_TEMPERATURE,
    GenerationClient,
    GenerationRequest,
    HttpBackend,
    ReplayBackend,
    make_embedder,
)
from .metrics import compute_report
from .prompts import (
    DEFAULT_BUDGET_TOKENS,
    Prompt,
    build_decomposed_prompt,
    build_graph_ensemble_prompt,
)
from .relmeta import load_registry
from .verifier import (
    DEFAULT_CAP_FRACTION,
    DEFAULT_K,
    DEFAULT_TAU,
    VerifierReport,
    detect_missing,
    verify,
)

log = logging.getLogger(__name__)

STAGE_CHOICES = ("decomposed", "full")
GROUP_CHOICES = ("sparse", "normal", "dense", "all")


@dataclass
class RunConfig:
    corpus_test: str = ""
    corpus_train: Optional[str] = None
    registry: str = ""
    pool: Optional[str] = None
    backend_kind: str = "replay"  # http | replay
    endpoint: str = ""
    model: str = "offline"
    replay: Optional[str] = None
    embedder_kind: str = "hashmock"
    embedder_endpoint: str = ""
    embedder_model: str = ""
    embedder_seed: int = 0
    shots: int = 3
    group: str = "all"
    stage: str = "full"
    concurrency: int = DEFAULT_CONCURRENCY
    seed: int = 0
    budget_tokens: int = DEFAULT_BUDGET_TOKENS
    temperature: float = DEFAULT_TEMPERATURE
    max_new_tokens_decomposed: int = DEFAULT_MAX_NEW_TOKENS
    max_new_tokens_ensemble: int = DEFAULT_MAX_NEW_TOKENS_ENSEMBLE
    query_mode: str = "gold"  # gold | all
    uniqueness_mode: str = "triplets"
    verifier_k: int = DEFAULT_K
    verifier_tau: float = DEFAULT_TAU
    verifier_cap_fraction: float = DEFAULT_CAP_FRACTION
    edge_cap: int = 20
    ordered_types: bool = False
    out_dir: str = "run"

    @classmethod
    def from_file(cls, path: str | Path, overrides: Optional[dict] = None) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        merged = {**data, **{k: v for k, v in (overrides or {}).items() if v is not None}}
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(merged) - known
        if unknown:
            raise GraphDpepError(f"unknown config keys: {sorted(unknown)}")
        return cls(**merged)

    def validate(self) -> None:
        if self.stage not in STAGE_CHOICES:
            raise GraphDpepError(f"stage must be one of {STAGE_CHOICES}, got {self.stage!r}")
        if self.group not in GROUP_CHOICES:
            raise GraphDpepError(f"group must be one of {GROUP_CHOICES}, got {self.group!r}")
        if self.backend_kind not in ("http", "replay"):
            raise GraphDpepError(f"backend must be http or replay, got {self.backend_kind!r}")
        if self.backend_kind == "replay" and not self.replay:
            raise GraphDpepError("replay backend needs a replay fixture path")
        if self.backend_kind == "http" and not self.endpoint:
            raise GraphDpepError("http backend needs an endpoint")
        if not self.corpus_test:
            raise GraphDpepError("corpus_test path is required")
        if not self.registry:
            raise GraphDpepError("registry path is required")


@dataclass
class DocResult:
    doc: Document
    accepted: list[Triplet] = field(default_factory=list)
    defect_counts: dict = field(default_factory=dict)
    report: Optional[VerifierReport] = None
    final: list[Triplet] = field(default_factory=list)
    missing_final: list[QueryPair] = field(default_factory=list)
    subgraphs: list[dict] = field(default_factory=list)


@dataclass
class RunArtifacts:
    out_dir: Path
    metrics_path: Path
    triplets_path: Path
    manifest_path: Path
    n_docs: int
    n_failed: int
    failures: dict
    backend_calls: int = 0


def _file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _make_backend(config: RunConfig):
    if config.backend_kind == "replay":
        return ReplayBackend(config.replay)
    return HttpBackend(config.endpoint)


def _map_units(units, fn, concurrency: int) -> dict:
    """Run fn over units (id, payload) with bounded parallelism; results keyed by id."""
    results: dict = {}
    if concurrency <= 1:
        for uid, payload in units:
            results[uid] = fn(payload)
        return results
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        futures = {uid: pool.submit(fn, payload) for uid, payload in units}
        for uid, fut in futures.items():
            results[uid] = fut.result()
    return results


def run_pipeline(config: RunConfig) -> RunArtifacts:
    config.validate()
    t_start = time.time()
    out = Path(config.out_dir)
    (out / "generations").mkdir(parents=True, exist_ok=True)
    (out / "subgraphs").mkdir(exist_ok=True)
    (out / "prompts").mkdir(exist_ok=True)

    registry = load_registry(config.registry)
    corpus = load_corpus(train_path=config.corpus_train, test_path=config.corpus_test)
    embedder = make_embedder(
        config.embedder_kind,
        base_url=config.embedder_endpoint,
        model=config.embedder_model,
        seed=config.embedder_seed,
    )
    if config.pool:
        pool = PrototypePool.load(config.pool)
    else:
        pool = build_pool(corpus.train, embedder, seed=config.seed)
    pool_docs = pool.resolve(corpus.train)

    targets = sorted(corpus.test, key=lambda d: d.doc_id)
    if config.group != "all":
        targets = [d for d in targets if density_group(d, config.query_mode) == config.group]

    client = GenerationClient(_make_backend(config), out / "generations" / "cache.jsonl")
    rels = registry.non_na()
    demos_by_rid = {
        rel.rid: demos_for_type(pool_docs, rel, config.shots, config.seed) for rel in rels
    }

    # ---- stage 1: decomposed per-relation extraction -------------------------
    prompts_log: list[tuple[tuple, dict]] = []
    units = []
    for doc in targets:
        for rel in rels:
            prompt = build_decomposed_prompt(
                rel, demos_by_rid[rel.rid], doc, registry, config.budget_tokens
            )
            prompts_log.append(((0, doc.doc_id, rel.rid), _prompt_row(prompt)))
            req = GenerationRequest(
                model=config.model,
                prompt_text=prompt.text,
                temperature=config.temperature,
                max_new_tokens=config.max_new_tokens_decomposed,
                seed=config.seed,
            )
            units.append(((doc.doc_id, rel.rid), req))

    def _gen(req: GenerationRequest):
        try:
            return ("ok", client.generate(req).text)
        except GraphDpepError as exc:
            return ("error", f"{type(exc).__name__}: {exc}")

    gen_results = _map_units(units, _gen, config.concurrency)

    failures: dict[str, str] = {}
    results: dict[str, DocResult] = {}
    for doc in targets:
        res = DocResult(doc=doc)
        seen: set = set()
        counts = {"incomplete": 0, "irrelevant": 0, "repetition": 0, "ignored": 0}
        for rel in rels:
            status, payload = gen_results[(doc.doc_id, rel.rid)]
            if status == "error":
                failures[doc.doc_id] = payload
                break
            parsed = parse_generation(
                payload, doc, registry, stage=STAGE_DECOMPOSED, prompted=rel, seen=seen
            )
            res.accepted.extend(parsed.triplets)
            for d in parsed.defects:
                counts[d.kind] += 1
            counts["ignored"] += parsed.ignored
        if doc.doc_id in failures:
            continue
        res.defect_counts = counts
        results[doc.doc_id] = res

    # ---- stage 2: verification ----------------------------------------------
    for doc_id, res in results.items():
        q = query_pairs(res.doc, config.query_mode)
        res.report = verify(
            doc_id,
            res.accepted,
            q,
            embedder,
            defect_counts=res.defect_counts,
            k=config.verifier_k,
            tau=config.verifier_tau,
            cap_fraction=config.verifier_cap_fraction,
        )
        res.final = list(res.report.kept)
        res.missing_final = list(res.report.missing)

    # ---- stage 3: graph-ensemble fill-in ------------------------------------
    if config.stage == "full":
        ens_units = []
        ens_prompts: dict = {}
        for doc_id in sorted(results):
            res = results[doc_id]
            graph = build_graph(res.report.kept, res.doc)
            for p_idx, pair in enumerate(res.report.missing):
                sub = association_subgraph(
                    graph, pair, res.doc, edge_cap=config.edge_cap,
                    ordered_types=config.ordered_types,
                )
                demos = demos_random(
                    pool_docs, config.shots, f"{config.seed}:{doc_id}:{p_idx}", registry
                )
                prompt = build_graph_ensemble_prompt(
                    pair, sub, demos, res.doc, registry, config.budget_tokens
                )
                prompts_log.append(((1, doc_id, p_idx), _prompt_row(prompt)))
                req = GenerationRequest(
                    model=config.model,
                    prompt_text=prompt.text,
                    temperature=config.temperature,
                    max_new_tokens=config.max_new_tokens_ensemble,
                    seed=config.seed,
                )
                ens_units.append(((doc_id, p_idx), req))
                ens_prompts[(doc_id, p_idx)] = (pair, sub)
        ens_results = _map_units(ens_units, _gen, config.concurrency)
        for doc_id in sorted(results):
            res = results[doc_id]
            known = {t.key for t in res.final}
            for p_idx, pair in enumerate(res.report.missing):
                status, payload = ens_results[(doc_id, p_idx)]
                sub = ens_prompts[(doc_id, p_idx)][1]
                entry = {"subgraph": sub.to_dict(), "answer": None}
                if status == "error":
                    failures[doc_id] = payload
                    entry["error"] = payload
                    res.subgraphs.append(entry)
                    continue
                answer = parse_mask_answer(payload, res.doc, pair, registry)
                if answer is not None:
                    entry["answer"] = answer.to_dict()
                    if answer.rid != "NA" and answer.key not in known:
                        known.add(answer.key)
                        res.final.append(answer)
                res.subgraphs.append(entry)
            res.missing_final = detect_missing(
                res.final, query_pairs(res.doc, config.query_mode)
            )
        for doc_id in list(failures):
            results.pop(doc_id, None)

    # ---- artifacts -----------------------------------------------------------
    ok_ids = sorted(results)
    ordered_prompts = [row for _, row in sorted(prompts_log, key=lambda kv: kv[0])]
    corpus_mod.write_jsonl(
        out / "prompts" / "decomposed.jsonl",
        [r for r in ordered_prompts if r["kind"] == "decomposed"],
    )
    corpus_mod.write_jsonl(
        out / "prompts" / "ensemble.jsonl",
        [r for r in ordered_prompts if r["kind"] != "decomposed"],
    )
    triplet_rows = []
    for doc_id in ok_ids:
        for t in results[doc_id].final:
            triplet_rows.append({"doc_id": doc_id, **t.to_dict()})
    corpus_mod.write_jsonl(out / "triplets.jsonl", triplet_rows)
    with open(out / "verifier.json", "w", encoding="utf-8") as fh:
        json.dump(
            [results[d].report.to_dict() for d in ok_ids],
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    for doc_id in ok_ids:
        res = results[doc_id]
        if res.subgraphs:
            with open(out / "subgraphs" / f"{doc_id}.json", "w", encoding="utf-8") as fh:
                json.dump(res.subgraphs, fh, indent=2, sort_keys=True)
                fh.write("\n")

    total_accepted = sum(len(results[d].accepted) for d in ok_ids)
    total_outliers = sum(len(results[d].report.outliers) for d in ok_ids)
    total_q = sum(len(query_pairs(results[d].doc, config.query_mode)) for d in ok_ids)
    total_missing = sum(len(results[d].missing_final) for d in ok_ids)
    report = compute_report(
        docs=[results[d].doc for d in ok_ids],
        preds_by_doc={d: results[d].final for d in ok_ids},
        embedder=embedder,
        registry=registry,
        outlier_rate=total_outliers / total_accepted if total_accepted else 0.0,
        missing_rate=total_missing / total_q if total_q else 0.0,
        uniqueness_mode=config.uniqueness_mode,
    )
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    config_blob = json.dumps(asdict(config), sort_keys=True, ensure_ascii=False)
    manifest = {
        "config": asdict(config),
        "config_sha256": hashlib.sha256(config_blob.encode("utf-8")).hexdigest(),
        "backend_id": client.backend.backend_id,
        "embedder_id": getattr(embedder, "backend_id", ""),
        "corpus_sha256": {
            "test": _file_sha256(config.corpus_test),
            "train": _file_sha256(config.corpus_train) if config.corpus_train else None,
        },
        "registry_sha256": _file_sha256(config.registry),
        "pool_doc_ids": pool.doc_ids,
        "n_targets": len(targets),
        "n_completed": len(ok_ids),
        "failures": failures,
        "started_unix": t_start,
        "finished_unix": time.time(),
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    log.info(
        "run complete: %d/%d docs, micro F1 %.4f",
        len(ok_ids), len(targets), report.micro.f1,
    )
    return RunArtifacts(
        out_dir=out,
        metrics_path=out / "metrics.json",
        triplets_path=out / "triplets.jsonl",
        manifest_path=out / "manifest.json",
        n_docs=len(ok_ids),
        n_failed=len(failures),
        failures=failures,
        backend_calls=client.backend_calls,
    )


def _prompt_row(prompt: Prompt) -> dict:
    return {
        "kind": prompt.meta.kind,
        "doc_id": prompt.meta.doc_id,
        "rid": prompt.meta.rid,
        "shots": prompt.meta.shots,
        "demo_doc_ids": list(prompt.meta.demo_doc_ids),
        "text": prompt.text,
    }


def evaluate_run(
    run_dir: str | Path,
    config: RunConfig,
    judge=None,
) -> dict:
    """Recompute the metrics report from a run directory's triplets.jsonl."""
    run_dir = Path(run_dir)
    registry = load_registry(config.registry)
    corpus = load_corpus(test_path=config.corpus_test)
    docs = sorted(corpus.test, key=lambda d: d.doc_id)
    if config.group != "all":
        docs = [d for d in docs if density_group(d, config.query_mode) == config.group]
    embedder = make_embedder(
        config.embedder_kind,
        base_url=config.embedder_endpoint,
        model=config.embedder_model,
        seed=config.embedder_seed,
    )
    preds_by_doc: dict[str, list[Triplet]] = {}
    for row in corpus_mod.read_jsonl(run_dir / "triplets.jsonl"):
        doc_id = row.pop("doc_id")
        preds_by_doc.setdefault(doc_id, []).append(Triplet.from_dict(row))
    rates = {"outlier_rate": 0.0, "missing_rate": 0.0}
    metrics_path = run_dir / "metrics.json"
    if metrics_path.exists():
        with open(metrics_path, "r", encoding="utf-8") as fh:
            prior = json.load(fh)
        rates["outlier_rate"] = prior.get("outlier_rate", 0.0)
        rates["missing_rate"] = prior.get("missing_rate", 0.0)
    report = compute_report(
        docs=docs,
        preds_by_doc=preds_by_doc,
        embedder=embedder,
        registry=registry,
        judge=judge,
        outlier_rate=rates["outlier_rate"],
        missing_rate=rates["missing_rate"],
        uniqueness_mode=config.uniqueness_mode,
    )
    return report.to_dict()
