"""Triplet graph over kept extractions and association sub-graph selection.

For a missing query pair, the association sub-graph collects kept edges that
either sit on the same endpoint slot as the pair (head = missing head, or
tail = missing tail) or connect entities whose type multiset matches the
pair's. Shared-endpoint edges rank first; an edge cap keeps prompts bounded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .corpus import Document, QueryPair
from .errors import UnresolvedTriplet
from .extract import Triplet

SHARED_ENTITY = "shared_entity"
TYPE_MATCH = "type_match"

DEFAULT_EDGE_CAP = 20


@dataclass(frozen=True)
class GraphNode:
    idx: int
    etype: str
    surface: str


@dataclass
class TripletGraph:
    doc_id: str
    nodes: list[GraphNode] = field(default_factory=list)
    edges: list[Triplet] = field(default_factory=list)

    def node(self, idx: int) -> GraphNode:
        for n in self.nodes:
            if n.idx == idx:
                return n
        raise KeyError(idx)


@dataclass
class AssociationSubgraph:
    pair: QueryPair
    triplets: list[Triplet] = field(default_factory=list)
    reasons: list[tuple[str, ...]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "pair": {"head": self.pair.head, "tail": self.pair.tail},
            "triplets": [t.to_dict() for t in self.triplets],
            "reasons": [list(r) for r in self.reasons],
        }


def build_graph(kept: Sequence[Triplet], doc: Document) -> TripletGraph:
    """Nodes are the distinct entities referenced by kept triplets, in first
    appearance order; edges keep the input order."""
    nodes: list[GraphNode] = []
    seen: set[int] = set()
    for t in kept:
        if t.head_idx is None or t.tail_idx is None:
            raise UnresolvedTriplet(f"triplet {t.raw_line!r} has unresolved endpoints")
        for idx in (t.head_idx, t.tail_idx):
            if idx not in seen:
                seen.add(idx)
                ent = doc.entities[idx]
                nodes.append(GraphNode(idx, ent.etype, ent.surface))
    return TripletGraph(doc_id=doc.doc_id, nodes=nodes, edges=list(kept))


def association_subgraph(
    graph: TripletGraph,
    missing: QueryPair,
    doc: Document,
    edge_cap: int = DEFAULT_EDGE_CAP,
    ordered_types: bool = False,
) -> AssociationSubgraph:
    """Select the edges associated with a missing pair.

    An edge qualifies when its head is the missing head, its tail is the
    missing tail, or its endpoint types match the pair's types (as an
    unordered set by default; ordered_types compares slot by slot). Each
    qualifying edge appears once with all of its reasons; shared-endpoint
    edges come first and win the cap.
    """
    h_type = doc.entities[missing.head].etype
    t_type = doc.entities[missing.tail].etype
    want_types = {h_type, t_type}

    shared: list[tuple[Triplet, tuple[str, ...]]] = []
    typed: list[tuple[Triplet, tuple[str, ...]]] = []
    for t in graph.edges:
        reasons = []
        if t.head_idx == missing.head or t.tail_idx == missing.tail:
            reasons.append(SHARED_ENTITY)
        e1t = doc.entities[t.head_idx].etype
        e2t = doc.entities[t.tail_idx].etype
        if ordered_types:
            if e1t == h_type and e2t == t_type:
                reasons.append(TYPE_MATCH)
        elif {e1t, e2t} == want_types:
            reasons.append(TYPE_MATCH)
        if not reasons:
            continue
        bucket = shared if SHARED_ENTITY in reasons else typed
        bucket.append((t, tuple(reasons)))

    picked = (shared + typed)[:edge_cap]
    return AssociationSubgraph(
        pair=missing,
        triplets=[t for t, _ in picked],
        reasons=[r for _, r in picked],
    )
