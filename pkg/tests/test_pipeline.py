"""End-to-end runs over the replay fixture: artifacts, resumability, failures."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict

import pytest

from conftest import E2E_DIR, make_e2e_config
from graphdpep.corpus import read_jsonl, write_jsonl
from graphdpep.errors import GraphDpepError
from graphdpep.llm import GenerationRequest, cache_key
from graphdpep.pipeline import RunConfig, evaluate_run, run_pipeline

TEST_IDS = [f"test-{i:05d}" for i in range(5)]


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("full")
    config = make_e2e_config(out)
    return config, run_pipeline(config)


# ---------------------------------------------------------------------------
# full-stage run
# ---------------------------------------------------------------------------

def test_full_run_completes_all_docs(full_run):
    _, artifacts = full_run
    assert artifacts.n_docs == 5
    assert artifacts.n_failed == 0
    assert artifacts.failures == {}
    assert artifacts.backend_calls == 23


def test_full_run_metrics(full_run):
    _, artifacts = full_run
    with open(artifacts.metrics_path) as fh:
        metrics = json.load(fh)
    assert metrics["micro"]["tp"] == 6
    assert metrics["micro"]["pred_count"] == 9
    assert metrics["micro"]["gold_count"] == 10
    assert metrics["micro"]["recall"] == 0.6
    assert abs(metrics["micro"]["f1"] - 12 / 19) < 1e-12
    assert metrics["macro"]["precision"] == 0.8125
    assert metrics["macro"]["recall"] == 0.6
    assert metrics["uniqueness"] == 1.0
    assert metrics["outlier_rate"] == 0.0
    assert metrics["missing_rate"] == 0.1
    assert metrics["n_docs"] == 5
    assert metrics["judge"] is None


def test_full_run_triplet_rows(full_run):
    _, artifacts = full_run
    rows = read_jsonl(artifacts.triplets_path)
    assert len(rows) == 9
    assert {r["doc_id"] for r in rows} <= set(TEST_IDS)
    for row in rows:
        assert {"doc_id", "head_surface", "tail_surface", "head_idx", "tail_idx",
                "rid", "explanation", "stage"} <= set(row)
        assert row["rid"] != "NA"


def test_full_run_prompt_logs(full_run):
    config, artifacts = full_run
    dec = read_jsonl(artifacts.out_dir / "prompts" / "decomposed.jsonl")
    ens = read_jsonl(artifacts.out_dir / "prompts" / "ensemble.jsonl")
    assert len(dec) == 20  # 5 docs x 4 relation types
    assert len(ens) == 3
    assert all(r["kind"] == "decomposed" for r in dec)
    assert sorted({r["doc_id"] for r in dec}) == TEST_IDS
    assert all(r["shots"] <= config.shots for r in dec)
    assert all(r["text"].endswith("[Answer]:") for r in ens)


def test_full_run_verifier_artifact(full_run):
    _, artifacts = full_run
    with open(artifacts.out_dir / "verifier.json") as fh:
        reports = json.load(fh)
    assert [r["doc_id"] for r in reports] == TEST_IDS
    noisy = reports[4]
    assert noisy["defect_counts"] == {
        "incomplete": 2, "irrelevant": 1, "repetition": 1, "ignored": 4,
    }


def test_full_run_subgraph_artifacts(full_run):
    _, artifacts = full_run
    sub_dir = artifacts.out_dir / "subgraphs"
    assert sorted(p.name for p in sub_dir.iterdir()) == [
        "test-00000.json", "test-00001.json",
    ]
    with open(sub_dir / "test-00000.json") as fh:
        entries = json.load(fh)
    assert len(entries) == 1
    assert entries[0]["answer"]["rid"] == "P17"
    with open(sub_dir / "test-00001.json") as fh:
        entries = json.load(fh)
    assert len(entries) == 2
    assert sorted(e["answer"]["rid"] for e in entries) == ["NA", "P205"]


def test_manifest_contents(full_run):
    config, artifacts = full_run
    with open(artifacts.manifest_path) as fh:
        manifest = json.load(fh)
    blob = json.dumps(asdict(config), sort_keys=True, ensure_ascii=False)
    assert manifest["config_sha256"] == hashlib.sha256(blob.encode()).hexdigest()
    assert manifest["config"]["model"] == "e2e-model"
    assert manifest["backend_id"].startswith("replay:")
    assert manifest["embedder_id"] == "hashmock-64-seed0"
    assert manifest["pool_doc_ids"] == ["train-00000", "train-00001", "train-00002"]
    assert manifest["n_targets"] == 5
    assert manifest["n_completed"] == 5
    assert manifest["failures"] == {}
    assert manifest["corpus_sha256"]["test"]
    assert manifest["registry_sha256"]


# ---------------------------------------------------------------------------
# decomposed-only stage
# ---------------------------------------------------------------------------

def test_decomposed_stage_skips_fill_in(tmp_path):
    config = make_e2e_config(tmp_path / "run", stage="decomposed")
    artifacts = run_pipeline(config)
    assert artifacts.backend_calls == 20
    assert list((artifacts.out_dir / "subgraphs").iterdir()) == []
    assert read_jsonl(artifacts.out_dir / "prompts" / "ensemble.jsonl") == []
    with open(artifacts.metrics_path) as fh:
        metrics = json.load(fh)
    assert metrics["micro"]["recall"] == 0.4
    assert metrics["missing_rate"] == 0.3


# ---------------------------------------------------------------------------
# resumability and caching
# ---------------------------------------------------------------------------

def test_rerun_hits_cache_and_reproduces_bytes(tmp_path):
    out = tmp_path / "run"
    first = run_pipeline(make_e2e_config(out))
    assert first.backend_calls == 23
    metrics_bytes = first.metrics_path.read_bytes()
    triplet_bytes = first.triplets_path.read_bytes()
    first.metrics_path.unlink()

    second = run_pipeline(make_e2e_config(out))
    assert second.backend_calls == 0
    assert second.metrics_path.read_bytes() == metrics_bytes
    assert second.triplets_path.read_bytes() == triplet_bytes


# ---------------------------------------------------------------------------
# failure isolation
# ---------------------------------------------------------------------------

def _drop_one_decomposed_row(config, doc_id, tmp_path):
    """Copy the replay fixture without the first decomposed-stage response for
    doc_id, identified by recomputing that request's cache key."""
    probe_out = tmp_path / "probe"
    probe = make_e2e_config(probe_out)
    run_pipeline(probe)
    target_key = None
    for row in read_jsonl(probe_out / "prompts" / "decomposed.jsonl"):
        if row["doc_id"] == doc_id:
            req = GenerationRequest(
                model=config.model,
                prompt_text=row["text"],
                temperature=config.temperature,
                max_new_tokens=config.max_new_tokens_decomposed,
                seed=config.seed,
            )
            target_key = cache_key(req)
            break
    assert target_key is not None
    kept = [r for r in read_jsonl(E2E_DIR / "replay.jsonl") if r["key"] != target_key]
    assert len(kept) == 22
    filtered = tmp_path / "filtered.jsonl"
    write_jsonl(filtered, kept)
    return filtered


def test_missing_response_fails_only_that_doc(tmp_path):
    base = make_e2e_config(tmp_path / "unused")
    filtered = _drop_one_decomposed_row(base, "test-00002", tmp_path)
    config = make_e2e_config(tmp_path / "run", replay=str(filtered))
    artifacts = run_pipeline(config)
    assert artifacts.n_failed == 1
    assert set(artifacts.failures) == {"test-00002"}
    assert "ReplayMiss" in artifacts.failures["test-00002"]
    assert artifacts.n_docs == 4
    rows = read_jsonl(artifacts.triplets_path)
    assert "test-00002" not in {r["doc_id"] for r in rows}
    with open(artifacts.manifest_path) as fh:
        manifest = json.load(fh)
    assert manifest["n_completed"] == 4
    assert set(manifest["failures"]) == {"test-00002"}
    with open(artifacts.metrics_path) as fh:
        metrics = json.load(fh)
    assert metrics["n_docs"] == 4


# ---------------------------------------------------------------------------
# evaluate_run
# ---------------------------------------------------------------------------

def test_evaluate_run_reproduces_metrics(full_run):
    config, artifacts = full_run
    got = evaluate_run(artifacts.out_dir, config)
    with open(artifacts.metrics_path) as fh:
        assert got == json.load(fh)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_config_from_file_merges_overrides(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "corpus_test": "t.json", "registry": "r.json",
        "replay": "x.jsonl", "shots": 4,
    }))
    config = RunConfig.from_file(path, overrides={"shots": 9, "model": None})
    assert config.shots == 9  # explicit override wins
    assert config.model == "offline"  # None override falls back to the file/default
    assert config.corpus_test == "t.json"


def test_config_from_file_rejects_unknown_keys(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"corpus_test": "t.json", "oops": 1}))
    with pytest.raises(GraphDpepError, match="unknown config keys"):
        RunConfig.from_file(path)


@pytest.mark.parametrize(
    "overrides, fragment",
    [
        ({"stage": "both"}, "stage"),
        ({"group": "huge"}, "group"),
        ({"backend_kind": "grpc"}, "backend"),
        ({"replay": None}, "replay"),
        ({"backend_kind": "http", "endpoint": ""}, "endpoint"),
        ({"corpus_test": ""}, "corpus_test"),
        ({"registry": ""}, "registry"),
    ],
)
def test_config_validate_errors(tmp_path, overrides, fragment):
    config = make_e2e_config(tmp_path, **overrides)
    with pytest.raises(GraphDpepError, match=fragment):
        config.validate()
