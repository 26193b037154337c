"""Few-shot document-level relation extraction with generative LLMs.

The pipeline decomposes extraction into one prompt per relation type,
self-calibrates the parsed triplets (defect pruning, embedding-space outlier
dropping, missing-pair detection), and re-prompts each still-missing entity
pair with an association sub-graph of supporting triplets.
"""

from .corpus import (
    Corpus,
    Document,
    Entity,
    GoldRelation,
    Mention,
    QueryPair,
    density_group,
    load_corpus,
    load_split,
    marked_context,
    query_pairs,
    resolve_entity,
)
from .errors import GraphDpepError
from .extract import Triplet, parse_generation, parse_mask_answer, render_triplet
from .gog import AssociationSubgraph, TripletGraph, association_subgraph, build_graph
from .icl import PrototypePool, build_pool, demos_for_type, demos_random
from .llm import (
    GenerationClient,
    GenerationRequest,
    GenerationResponse,
    HashMockEmbedder,
    HttpBackend,
    ReplayBackend,
    cache_key,
    make_embedder,
)
from .metrics import MetricsReport, compute_report, macro_prf, micro_prf
from .pipeline import RunArtifacts, RunConfig, evaluate_run, run_pipeline
from .prompts import (
    build_decomposed_prompt,
    build_ensemble_baseline_prompt,
    build_graph_ensemble_prompt,
)
from .relmeta import (
    RelationRegistry,
    RelationType,
    linearize,
    load_default_registry,
    load_registry,
    verbalize,
)
from .verifier import detect_missing, detect_outliers, lof_scores, verify

__version__ = "0.1.0"

__all__ = [
    "AssociationSubgraph",
    "Corpus",
    "Document",
    "Entity",
    "GenerationClient",
    "GenerationRequest",
    "GenerationResponse",
    "GoldRelation",
    "GraphDpepError",
    "HashMockEmbedder",
    "HttpBackend",
    "Mention",
    "MetricsReport",
    "PrototypePool",
    "QueryPair",
    "RelationRegistry",
    "RelationType",
    "ReplayBackend",
    "RunArtifacts",
    "RunConfig",
    "TripletGraph",
    "Triplet",
    "association_subgraph",
    "build_decomposed_prompt",
    "build_ensemble_baseline_prompt",
    "build_graph",
    "build_graph_ensemble_prompt",
    "build_pool",
    "cache_key",
    "compute_report",
    "demos_for_type",
    "demos_random",
    "density_group",
    "detect_missing",
    "detect_outliers",
    "evaluate_run",
    "linearize",
    "load_corpus",
    "load_default_registry",
    "load_registry",
    "load_split",
    "lof_scores",
    "macro_prf",
    "make_embedder",
    "marked_context",
    "micro_prf",
    "parse_generation",
    "parse_mask_answer",
    "query_pairs",
    "render_triplet",
    "resolve_entity",
    "run_pipeline",
    "verbalize",
    "verify",
]
