"""Demonstration pool selection and demo sampling."""

from __future__ import annotations

import random

import numpy as np
import pytest

from conftest import PlantedEmbedder, make_doc
from graphdpep.icl import (
    PrototypePool,
    build_pool,
    demos_for_type,
    demos_random,
)
from graphdpep.relmeta import linearize


def _docs_with_gold(n, rid="P17"):
    docs = []
    for i in range(n):
        docs.append(
            make_doc(
                f"train-{i:05d}",
                [(f"city{i}", "LOC"), (f"state{i}", "LOC")],
                [(0, rid, 1)],
            )
        )
    return docs


def _brute_greedy(sims, knn, size):
    """Re-derived vote-based greedy: in-neighbors vote for a candidate, each
    vote discounted by 10^-(overlap of the voter's neighborhood with the
    current selection); ties to the lower index (doc ids are index-ordered)."""
    n = len(sims)
    nn = []
    for i in range(n):
        order = sorted((j for j in range(n) if j != i), key=lambda j: (-sims[i][j], j))
        nn.append(order[: min(knn, n - 1)])
    selected: list[int] = []
    while len(selected) < size:
        best, best_score = None, None
        for u in range(n):
            if u in selected:
                continue
            score = 0.0
            for v in range(n):
                if u in nn[v]:
                    overlap = sum(1 for w in nn[v] if w in selected)
                    score += 10.0 ** (-overlap)
            if best_score is None or score > best_score:
                best, best_score = u, score
        selected.append(best)
    return selected


# ---------------------------------------------------------------------------
# pool construction
# ---------------------------------------------------------------------------

def test_pool_size_zero_is_empty():
    docs = _docs_with_gold(4)
    pool = build_pool(docs, PlantedEmbedder({}), pool_size=0)
    assert pool.doc_ids == []


def test_pool_covering_everything_is_sorted_by_doc_id():
    docs = list(reversed(_docs_with_gold(5)))
    pool = build_pool(docs, PlantedEmbedder({}), pool_size=5)
    assert pool.doc_ids == [f"train-{i:05d}" for i in range(5)]
    bigger = build_pool(docs, PlantedEmbedder({}), pool_size=50)
    assert bigger.doc_ids == pool.doc_ids


def test_pool_records_parameters():
    docs = _docs_with_gold(3)
    embedder = PlantedEmbedder({})
    pool = build_pool(docs, embedder, knn_k=4, pool_size=2, seed=9)
    assert pool.knn_k == 4
    assert pool.pool_size == 2
    assert pool.seed == 9
    assert pool.embedder_id == "planted"


def _cluster_embedder(docs):
    rng = random.Random(11)
    table = {}
    for i, doc in enumerate(docs):
        base = (1.0, 0.0) if i < 5 else (0.0, 1.0)
        jitter = rng.uniform(-0.05, 0.05)
        table[doc.plain_text()] = (base[0] + jitter, base[1] - jitter)
    return PlantedEmbedder(table)


def test_two_clusters_yield_one_pick_each():
    docs = _docs_with_gold(10)
    embedder = _cluster_embedder(docs)
    pool = build_pool(docs, embedder, knn_k=4, pool_size=2)
    picked = [int(i.split("-")[1]) for i in pool.doc_ids]
    assert {picked[0] < 5, picked[1] < 5} == {True, False}


def test_pool_is_deterministic():
    docs = _docs_with_gold(10)
    embedder = _cluster_embedder(docs)
    a = build_pool(docs, embedder, knn_k=3, pool_size=4)
    b = build_pool(docs, embedder, knn_k=3, pool_size=4)
    assert a.doc_ids == b.doc_ids


def test_pool_matches_independent_greedy():
    rng = random.Random(17)
    for _ in range(10):
        n = rng.randint(3, 14)
        dim = 3
        vecs = [[rng.uniform(-1, 1) for _ in range(dim)] for _ in range(n)]
        docs = _docs_with_gold(n)
        table = {doc.plain_text(): tuple(v) for doc, v in zip(docs, vecs)}
        embedder = PlantedEmbedder(table, dim=dim)
        size = rng.randint(1, n - 1)
        knn = rng.choice([1, 2, 3, 10])

        pool = build_pool(docs, embedder, knn_k=knn, pool_size=size)

        unit = [np.asarray(v) / np.linalg.norm(v) for v in vecs]
        sims = [[float(np.dot(a, b)) for b in unit] for a in unit]
        want = _brute_greedy(sims, knn, size)
        assert pool.doc_ids == [docs[i].doc_id for i in want]


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def test_pool_save_load_resolve(tmp_path):
    docs = _docs_with_gold(4)
    pool = build_pool(docs, PlantedEmbedder({}), knn_k=2, pool_size=4, seed=3)
    path = tmp_path / "pool.json"
    pool.save(path)
    loaded = PrototypePool.load(path)
    assert loaded.doc_ids == pool.doc_ids
    assert (loaded.knn_k, loaded.pool_size, loaded.seed) == (2, 4, 3)
    resolved = loaded.resolve(docs)
    assert [d.doc_id for d in resolved] == loaded.doc_ids


# ---------------------------------------------------------------------------
# per-relation demos
# ---------------------------------------------------------------------------

def test_demos_for_type_deterministic_and_filtered(golden_registry):
    rel = golden_registry.get("P17")
    pool_docs = _docs_with_gold(8)
    pool_docs += [
        make_doc("train-00008", [("kim", "PER"), ("seoul", "LOC")], [(0, "P19", 1)]),
        make_doc("train-00009", [("ada", "PER"), ("london", "LOC")], [(0, "P19", 1)]),
    ]
    a = demos_for_type(pool_docs, rel, 3, seed=4)
    b = demos_for_type(pool_docs, rel, 3, seed=4)
    assert [d.doc.doc_id for d in a] == [d.doc.doc_id for d in b]
    assert len(a) == 3
    for demo in a:
        assert not demo.negative
        assert all(rid == "P17" for _, rid, _, _ in demo.triplets)


def test_demos_for_type_takes_all_when_short(golden_registry):
    rel = golden_registry.get("P17")
    pool_docs = _docs_with_gold(1)
    demos = demos_for_type(pool_docs, rel, 3, seed=0)
    assert len(demos) == 1
    assert demos[0].doc.doc_id == "train-00000"


def test_demos_for_type_absent_relation_gives_negative(golden_registry):
    rel = golden_registry.get("P22")
    pool_docs = _docs_with_gold(5)
    demos = demos_for_type(pool_docs, rel, 3, seed=0)
    assert len(demos) == 1
    assert demos[0].negative
    assert demos[0].triplets == ()
    assert demos[0].doc in pool_docs


def test_demos_for_type_empty_pool(golden_registry):
    assert demos_for_type([], golden_registry.get("P17"), 3, seed=0) == []


def test_demos_for_type_cycles_alias_phrasings(golden_registry):
    rel = golden_registry.get("P17")
    assert len(rel.aliases) == 1
    pool_docs = _docs_with_gold(4)
    demos = demos_for_type(pool_docs, rel, 4, seed=1)
    assert len(demos) == 4
    for i, demo in enumerate(demos):
        head, rid, tail, expl = demo.triplets[0]
        want_tail_sentence = linearize(rel, head, tail, i % 2)
        assert expl.endswith(want_tail_sentence)


# ---------------------------------------------------------------------------
# random demos
# ---------------------------------------------------------------------------

def test_demos_random_zero_and_empty(golden_registry):
    assert demos_random([], 3, seed=0, registry=golden_registry) == []
    assert demos_random(_docs_with_gold(3), 0, seed=0, registry=golden_registry) == []


def test_demos_random_seeded_repeatability(golden_registry):
    pool_docs = _docs_with_gold(6)
    a = demos_random(pool_docs, 3, seed=1, registry=golden_registry)
    b = demos_random(pool_docs, 3, seed=1, registry=golden_registry)
    assert [d.doc.doc_id for d in a] == [d.doc.doc_id for d in b]
    c = demos_random(pool_docs, 3, seed=2, registry=golden_registry)
    assert [d.doc.doc_id for d in a] != [d.doc.doc_id for d in c]


def test_demos_random_full_pool_is_a_permutation(golden_registry):
    pool_docs = _docs_with_gold(5)
    demos = demos_random(pool_docs, 5, seed=0, registry=golden_registry)
    assert sorted(d.doc.doc_id for d in demos) == [d.doc_id for d in pool_docs]


def test_demos_random_renders_all_gold_triplets(golden_registry):
    doc = make_doc(
        "train-00000",
        [("a", "LOC"), ("b", "LOC"), ("c", "PER")],
        [(0, "P17", 1), (2, "P19", 0)],
    )
    demos = demos_random([doc], 1, seed=0, registry=golden_registry)
    assert len(demos[0].triplets) == 2
    assert {rid for _, rid, _, _ in demos[0].triplets} == {"P17", "P19"}


def test_demos_random_gold_free_doc_is_negative(golden_registry):
    doc = make_doc("train-00000", [("a", "LOC"), ("b", "LOC")], [])
    demos = demos_random([doc], 1, seed=0, registry=golden_registry)
    assert demos[0].negative
