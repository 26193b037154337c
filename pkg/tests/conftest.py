"""Shared fixtures: checked-in corpora, registries, and small factories."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from graphdpep.corpus import Document, Entity, GoldRelation, Mention, load_split
from graphdpep.pipeline import RunConfig
from graphdpep.relmeta import load_registry

FIXTURES = Path(__file__).parent / "fixtures"
E2E_DIR = FIXTURES / "e2e"

E2E_PATH_KEYS = ("corpus_test", "corpus_train", "registry", "pool", "replay")


@pytest.fixture(scope="session")
def golden_registry():
    return load_registry(FIXTURES / "golden_registry.json")


@pytest.fixture(scope="session")
def marked_docs():
    """Two checked-in documents with dense entity annotation: the first is a
    demo document, the second the matching target document."""
    return load_split(FIXTURES / "alton.json", "test")


@pytest.fixture(scope="session")
def e2e_registry():
    return load_registry(E2E_DIR / "registry.json")


@pytest.fixture(scope="session")
def e2e_test_docs():
    return load_split(E2E_DIR / "test.json", "test")


def make_e2e_config(out_dir: Path, **overrides) -> RunConfig:
    """Run config over the replay fixture, with paths made absolute."""
    with open(E2E_DIR / "config.json", "r", encoding="utf-8") as fh:
        data = json.load(fh)
    for key in E2E_PATH_KEYS:
        if data.get(key):
            data[key] = str(E2E_DIR / data[key])
    data["out_dir"] = str(out_dir)
    data.update(overrides)
    return RunConfig(**data)


def build_golden_prompts(registry, docs):
    """Rebuild the two checked-in golden prompts from their input fixture."""
    from graphdpep.corpus import QueryPair
    from graphdpep.extract import STAGE_DECOMPOSED, Triplet
    from graphdpep.gog import AssociationSubgraph
    from graphdpep.prompts import (
        Demo,
        build_decomposed_prompt,
        build_graph_ensemble_prompt,
    )

    with open(FIXTURES / "golden" / "prompt_inputs.json", "r", encoding="utf-8") as fh:
        inputs = json.load(fh)

    dec = inputs["decomposed"]
    demo = Demo(
        doc=docs[dec["demo_doc"]],
        triplets=tuple(tuple(t) for t in dec["demo_triplets"]),
    )
    decomposed = build_decomposed_prompt(
        registry.get(dec["rid"]), [demo], docs[dec["target_doc"]], registry
    )

    ens = inputs["ensemble"]
    target = docs[ens["target_doc"]]
    triplets = tuple(
        Triplet(
            head_surface=target.entities[row["head_idx"]].surface,
            tail_surface=target.entities[row["tail_idx"]].surface,
            head_idx=row["head_idx"],
            tail_idx=row["tail_idx"],
            rid=row["rid"],
            explanation=row["explanation"],
            stage=STAGE_DECOMPOSED,
        )
        for row in ens["triplets"]
    )
    pair = QueryPair(head=ens["pair"]["head"], tail=ens["pair"]["tail"])
    sub = AssociationSubgraph(pair=pair, triplets=triplets, reasons=())
    ensemble = build_graph_ensemble_prompt(pair, sub, [], target, registry)
    return decomposed, ensemble


def make_doc(doc_id: str, entities, gold, title: str = "t") -> Document:
    """Single-sentence document: entities = [(surface, etype)], surfaces may be
    multi-token; gold = [(head, rid, tail)]."""
    tokens: list[str] = []
    ents = []
    for idx, (surface, etype) in enumerate(entities):
        words = surface.split(" ")
        start = len(tokens)
        tokens.extend(words)
        ents.append(
            Entity(idx, etype, (Mention(0, start, start + len(words), surface),))
        )
    return Document(
        doc_id=doc_id,
        title=title,
        sents=(tuple(tokens),),
        entities=tuple(ents),
        gold=tuple(GoldRelation(h, t, rid) for h, rid, t in gold),
    )


class PlantedEmbedder:
    """Embedder that returns hand-chosen vectors for known texts.

    Unknown texts fall back to a fixed unit vector so cosine stays defined.
    """

    backend_id = "planted"

    def __init__(self, table: dict[str, tuple[float, ...]], dim: int = 2):
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.dim = dim
        fallback = np.zeros(dim)
        fallback[0] = 1.0
        self.fallback = fallback

    def embed(self, texts):
        if not texts:
            return np.zeros((0, self.dim))
        return np.stack([self.table.get(t, self.fallback) for t in texts])
