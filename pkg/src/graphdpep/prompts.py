"""Prompt assembly for the three prompt families.

Builders produce plain text plus metadata. Layouts are fixed: the decomposed
prompt interleaves [context]/[Relation] blocks per demo and ends with an
empty [Relation]: slot; the graph-ensemble prompt shows the full relation
list, association triplets with their explanations, and a [MASK] query line.
Demos are dropped whole from the end when the token budget is tight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .corpus import Document, QueryPair, marked_context
from .errors import BudgetExceeded
from .gog import AssociationSubgraph
from .relmeta import RelationRegistry, RelationType

DEFAULT_BUDGET_TOKENS = 4096

NEGATIVE_LINE = "Cannot find a pair."

KIND_DECOMPOSED = "decomposed"
KIND_ENSEMBLE_BASELINE = "ensemble_baseline"
KIND_GRAPH_ENSEMBLE = "graph_ensemble"


@dataclass(frozen=True)
class Demo:
    """A demonstration document with renderable gold triplets.

    Triplet entries are (head surface, rid, tail surface, explanation body);
    the explanation body is rendered after "Because". A negative demo renders
    the no-pair line instead.
    """

    doc: Document
    triplets: tuple[tuple[str, str, str, str], ...] = ()
    negative: bool = False


@dataclass(frozen=True)
class PromptMeta:
    kind: str
    doc_id: str
    rid: Optional[str] = None
    shots: int = 0
    demo_doc_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class Prompt:
    text: str
    meta: PromptMeta


@dataclass(frozen=True)
class Block:
    text: str
    droppable: bool = False


def estimate_tokens(text: str, estimator: Optional[Callable[[str], int]] = None) -> int:
    if estimator is not None:
        return estimator(text)
    return math.ceil(len(text) / 4)


def fit_budget(
    blocks: Sequence[Block],
    budget_tokens: int,
    estimator: Optional[Callable[[str], int]] = None,
) -> tuple[str, int]:
    """Join blocks, dropping droppable ones from the end until they fit.

    Returns (text, dropped_count). Raises BudgetExceeded when the required
    blocks alone blow the budget; never truncates inside a block.
    """

    kept = list(blocks)
    dropped = 0
    while True:
        text = "\n\n".join(b.text for b in kept)
        cost = estimate_tokens(text, estimator)
        if cost <= budget_tokens:
            return text, dropped
        drops = [i for i, b in enumerate(kept) if b.droppable]
        if not drops:
            raise BudgetExceeded(
                f"required prompt blocks need {cost} tokens, budget is {budget_tokens}"
            )
        del kept[drops[-1]]  # last demo goes first
        dropped += 1


def _quoted_name_list(registry: RelationRegistry) -> str:
    names = [r.name for r in registry.non_na()]
    return "[" + ", ".join(f"‘{n}’" for n in names) + "]"


def _demo_triplet_lines(demo: Demo, registry: RelationRegistry) -> str:
    if demo.negative or not demo.triplets:
        return NEGATIVE_LINE
    lines = []
    for head, rid, tail, expl in demo.triplets:
        name = registry.get(rid).name
        lines.append(f"(**{head}**, '{name}', **{tail}**) | Because {expl}")
    return "\n".join(lines)


def build_decomposed_prompt(
    rel: RelationType,
    demos: Sequence[Demo],
    target: Document,
    registry: RelationRegistry,
    budget_tokens: int = DEFAULT_BUDGET_TOKENS,
    estimator: Optional[Callable[[str], int]] = None,
) -> Prompt:
    """Per-relation extraction prompt; mentions no other relation by name."""
    name = rel.name
    if demos:
        instruction = (
            f"Based on the context, assign the relation “{name}” for possible entity"
            f" pairs and entities are marked in \"**entity**\". To help you, I provide"
            f" examples of relation “{name}”.\nExamples:"
        )
    else:
        instruction = (
            f"Based on the context, assign the relation “{name}” for possible entity"
            f" pairs and entities are marked in \"**entity**\"."
        )
    blocks = [Block(instruction)]
    for demo in demos:
        body = (
            f"[context]:{marked_context(demo.doc)}\n\n[Relation]:\n"
            + _demo_triplet_lines(demo, registry)
        )
        blocks.append(Block(body, droppable=True))
    blocks.append(Block(f"[context]:{marked_context(target)}\n\n[Relation]:"))
    text, dropped = fit_budget(blocks, budget_tokens, estimator)
    kept_demos = list(demos)[: len(demos) - dropped]
    return Prompt(
        text=text,
        meta=PromptMeta(
            kind=KIND_DECOMPOSED,
            doc_id=target.doc_id,
            rid=rel.rid,
            shots=len(kept_demos),
            demo_doc_ids=tuple(d.doc.doc_id for d in kept_demos),
        ),
    )


def build_ensemble_baseline_prompt(
    demos: Sequence[Demo],
    target: Document,
    registry: RelationRegistry,
    budget_tokens: int = DEFAULT_BUDGET_TOKENS,
    estimator: Optional[Callable[[str], int]] = None,
) -> Prompt:
    """Single prompt listing every relation name (NA excluded)."""
    instruction = (
        "List the relation triplets among the entities marked in “**entity**”"
        " from the given context and provide the triplet semantic explanation."
        " The relation labels are provided in the list:\n" + _quoted_name_list(registry)
    )
    blocks = [Block(instruction)]
    for demo in demos:
        if demo.negative or not demo.triplets:
            body_lines = NEGATIVE_LINE
        else:
            body_lines = "\n".join(
                f"({head}, {registry.get(rid).name}, {tail}), [explanation] {expl}"
                for head, rid, tail, expl in demo.triplets
            )
        blocks.append(
            Block(
                f"[Context]: {marked_context(demo.doc)}\n\n[Relation Triplet]:\n{body_lines}",
                droppable=True,
            )
        )
    blocks.append(Block(f"[Context]: {marked_context(target)}\n\n[Relation Triplet]:"))
    text, dropped = fit_budget(blocks, budget_tokens, estimator)
    kept_demos = list(demos)[: len(demos) - dropped]
    return Prompt(
        text=text,
        meta=PromptMeta(
            kind=KIND_ENSEMBLE_BASELINE,
            doc_id=target.doc_id,
            shots=len(kept_demos),
            demo_doc_ids=tuple(d.doc.doc_id for d in kept_demos),
        ),
    )


def _subgraph_lines(subgraph: AssociationSubgraph, registry: RelationRegistry) -> str:
    if not subgraph.triplets:
        return "None."
    lines = []
    for t in subgraph.triplets:
        name = registry.get(t.rid).name
        lines.append(f"(**{t.head_surface}**, '{name}', **{t.tail_surface}**) | {t.explanation}")
    return "\n".join(lines)


def build_graph_ensemble_prompt(
    missing: QueryPair,
    subgraph: AssociationSubgraph,
    demos: Sequence[Demo],
    target: Document,
    registry: RelationRegistry,
    budget_tokens: int = DEFAULT_BUDGET_TOKENS,
    estimator: Optional[Callable[[str], int]] = None,
) -> Prompt:
    """Fill-in prompt for one missing pair, grounded in its association triplets."""
    instruction = (
        "From the relation list assign a label for the query pair given the"
        " associated relation triplets that are extracted from the context."
        " Explain the assignment of query pair.\n" + _quoted_name_list(registry)
    )
    blocks = [Block(instruction)]
    for demo in demos:
        body = (
            f"[Context]: {marked_context(demo.doc)}\n\n[Relation Triplets]:\n"
            + _demo_triplet_lines(demo, registry)
        )
        blocks.append(Block(body, droppable=True))
    head_surface = target.entities[missing.head].surface
    tail_surface = target.entities[missing.tail].surface
    tail_block = (
        f"[Context]: {marked_context(target)}\n\n"
        f"[Association Triplets]:\n{_subgraph_lines(subgraph, registry)}\n\n"
        f"[Query Pair]:\n(**{head_surface}**, [MASK], **{tail_surface}**) | [Explanation]\n\n"
        f"[Answer]:"
    )
    blocks.append(Block(tail_block))
    text, dropped = fit_budget(blocks, budget_tokens, estimator)
    kept_demos = list(demos)[: len(demos) - dropped]
    return Prompt(
        text=text,
        meta=PromptMeta(
            kind=KIND_GRAPH_ENSEMBLE,
            doc_id=target.doc_id,
            shots=len(kept_demos),
            demo_doc_ids=tuple(d.doc.doc_id for d in kept_demos),
        ),
    )
