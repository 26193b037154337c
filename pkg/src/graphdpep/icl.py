"""Demonstration pool construction and demo sampling.

The pool is picked with a vote-based greedy pass over a directed k-NN graph
of document embeddings: each round scores every unselected document by the
votes of its in-neighbors, discounting voters whose neighborhoods already
overlap the selection, so the pool spreads across the embedding space.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Document
from .prompts import Demo
from .relmeta import NA_RID, RelationRegistry, RelationType, compose_explanation

DEFAULT_KNN_K = 10
DEFAULT_POOL_SIZE = 1500


@dataclass
class PrototypePool:
    doc_ids: list[str]
    knn_k: int = DEFAULT_KNN_K
    pool_size: int = DEFAULT_POOL_SIZE
    seed: int = 0
    embedder_id: str = ""

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "doc_ids": self.doc_ids,
                    "knn_k": self.knn_k,
                    "pool_size": self.pool_size,
                    "seed": self.seed,
                    "embedder_id": self.embedder_id,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "PrototypePool":
        with open(path, "r", encoding="utf-8") as fh:
            row = json.load(fh)
        return cls(
            doc_ids=list(row["doc_ids"]),
            knn_k=int(row["knn_k"]),
            pool_size=int(row["pool_size"]),
            seed=int(row.get("seed", 0)),
            embedder_id=row.get("embedder_id", ""),
        )

    def resolve(self, docs: Sequence[Document]) -> list[Document]:
        by_id = {d.doc_id: d for d in docs}
        return [by_id[i] for i in self.doc_ids]


def _knn_lists(emb: np.ndarray, k: int) -> list[list[int]]:
    # cosine similarity neighborhoods; ties broken toward the lower index
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    unit = emb / norms
    sim = unit @ unit.T
    n = emb.shape[0]
    k = min(k, n - 1)
    out = []
    for i in range(n):
        order = sorted((j for j in range(n) if j != i), key=lambda j: (-sim[i, j], j))
        out.append(order[:k])
    return out


def build_pool(
    train_docs: Sequence[Document],
    embedder,
    knn_k: int = DEFAULT_KNN_K,
    pool_size: int = DEFAULT_POOL_SIZE,
    seed: int = 0,
) -> PrototypePool:
    """Greedy vote-based selection of pool_size documents from the train split."""
    docs = list(train_docs)
    pool = PrototypePool(
        doc_ids=[], knn_k=knn_k, pool_size=pool_size, seed=seed,
        embedder_id=getattr(embedder, "backend_id", ""),
    )
    if not docs or pool_size <= 0:
        return pool
    if pool_size >= len(docs):
        pool.doc_ids = sorted(d.doc_id for d in docs)
        return pool

    emb = np.asarray(embedder.embed([d.plain_text() for d in docs]))
    nn = _knn_lists(emb, knn_k)
    n = len(docs)
    in_nn: list[list[int]] = [[] for _ in range(n)]
    for v, neighbors in enumerate(nn):
        for u in neighbors:
            in_nn[u].append(v)

    selected: list[int] = []
    selected_set: set[int] = set()
    while len(selected) < pool_size:
        best_u, best_score = -1, -1.0
        for u in range(n):
            if u in selected_set:
                continue
            score = sum(
                10.0 ** (-sum(1 for w in nn[v] if w in selected_set)) for v in in_nn[u]
            )
            # ties go to the smaller doc_id
            if score > best_score or (
                score == best_score and docs[u].doc_id < docs[best_u].doc_id
            ):
                best_u, best_score = u, score
        selected.append(best_u)
        selected_set.add(best_u)
    pool.doc_ids = [docs[u].doc_id for u in selected]
    return pool


def _gold_demo_triplets(
    doc: Document,
    rels: Sequence[RelationType],
    alias_index_for: dict[str, int],
) -> tuple[tuple[str, str, str, str], ...]:
    rel_by_rid = {r.rid: r for r in rels}
    out = []
    for g in doc.gold:
        rel = rel_by_rid.get(g.rid)
        if rel is None or rel.is_na:
            continue
        head = doc.entities[g.head]
        tail = doc.entities[g.tail]
        alias_index = alias_index_for.get(g.rid, 0) % (1 + len(rel.aliases))
        expl = compose_explanation(
            rel, head.surface, tail.surface, head.etype, tail.etype, alias_index
        )
        out.append((head.surface, g.rid, tail.surface, expl))
    return tuple(out)


def demos_for_type(
    pool_docs: Sequence[Document],
    rel: RelationType,
    n: int,
    seed: int,
) -> list[Demo]:
    """Seeded sample of n pool documents carrying gold triplets of `rel`.

    Demo i cycles the relation's alias phrasings (i mod 1+|aliases|). With no
    positive candidates in the pool, one negative demo is drawn instead.
    """
    rng = random.Random(f"{seed}:{rel.rid}:demos")
    candidates = [d for d in pool_docs if any(g.rid == rel.rid for g in d.gold)]
    if not candidates:
        if not pool_docs:
            return []
        return [Demo(doc=rng.choice(list(pool_docs)), triplets=(), negative=True)]
    take = rng.sample(candidates, min(n, len(candidates)))
    demos = []
    for i, doc in enumerate(take):
        alias_index = i % (1 + len(rel.aliases))
        demos.append(Demo(doc=doc, triplets=_gold_demo_triplets(doc, [rel], {rel.rid: alias_index})))
    return demos


def demos_random(
    pool_docs: Sequence[Document],
    n: int,
    seed: int,
    registry: RelationRegistry,
) -> list[Demo]:
    """Seeded sample of n pool documents rendering all their gold triplets."""
    if not pool_docs:
        return []
    rng = random.Random(f"{seed}:random:demos")
    take = rng.sample(list(pool_docs), min(n, len(pool_docs)))
    rels = [r for r in registry if not r.is_na]
    demos = []
    for i, doc in enumerate(take):
        alias_index_for = {r.rid: i for r in rels}
        triplets = _gold_demo_triplets(doc, rels, alias_index_for)
        demos.append(Demo(doc=doc, triplets=triplets, negative=not triplets))
    return demos
