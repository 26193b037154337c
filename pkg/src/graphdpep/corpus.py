"""Document corpus loading and the span-level document model.

Input files are JSON arrays of records with pre-tokenized sentences, an
entity cluster list (``vertexSet``) and gold relation labels. Validation is
strict: a bad record aborts the load with the record index and a reason.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import DanglingEntityIndex, MalformedRecord

ENTITY_TYPES = ("PER", "ORG", "LOC", "TIME", "NUM", "MISC")

SPARSE = "sparse"
NORMAL = "normal"
DENSE = "dense"
DENSITY_GROUPS = (SPARSE, NORMAL, DENSE)


@dataclass(frozen=True)
class Mention:
    """A contiguous token span inside one sentence."""

    sent_id: int
    start: int
    end: int  # exclusive
    surface: str


@dataclass(frozen=True)
class Entity:
    idx: int
    etype: str
    mentions: tuple[Mention, ...]

    @property
    def surface(self) -> str:
        # canonical surface = first mention
        return self.mentions[0].surface


@dataclass(frozen=True)
class GoldRelation:
    head: int
    tail: int
    rid: str
    evidence: tuple[int, ...] = ()


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    sents: tuple[tuple[str, ...], ...]
    entities: tuple[Entity, ...]
    gold: tuple[GoldRelation, ...]

    def plain_text(self) -> str:
        """All sentence tokens joined with single spaces, no markers."""
        return " ".join(" ".join(s) for s in self.sents)


@dataclass(frozen=True)
class QueryPair:
    head: int
    tail: int


@dataclass
class Corpus:
    train: list[Document] = field(default_factory=list)
    dev: list[Document] = field(default_factory=list)
    test: list[Document] = field(default_factory=list)

    def split(self, name: str) -> list[Document]:
        if name not in ("train", "dev", "test"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def counts(self) -> dict[str, int]:
        return {"train": len(self.train), "dev": len(self.dev), "test": len(self.test)}


def _join_tokens(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


def _parse_record(raw: dict, index: int, split: str) -> Document:
    if not isinstance(raw, dict):
        raise MalformedRecord(index, "record is not an object")
    for key in ("title", "sents", "vertexSet", "labels"):
        if key not in raw:
            raise MalformedRecord(index, f"missing key {key!r}")
    sents_raw = raw["sents"]
    if not isinstance(sents_raw, list) or not all(
        isinstance(s, list) and all(isinstance(t, str) for t in s) for s in sents_raw
    ):
        raise MalformedRecord(index, "sents must be a list of token lists")
    sents = tuple(tuple(s) for s in sents_raw)

    vertex_set = raw["vertexSet"]
    if not isinstance(vertex_set, list):
        raise MalformedRecord(index, "vertexSet must be a list")
    entities = []
    for e_idx, cluster in enumerate(vertex_set):
        if not isinstance(cluster, list) or not cluster:
            raise MalformedRecord(index, f"entity {e_idx}: empty or non-list mention cluster")
        mentions = []
        etype = None
        for m in cluster:
            if not isinstance(m, dict) or "sent_id" not in m or "pos" not in m or "type" not in m:
                raise MalformedRecord(index, f"entity {e_idx}: malformed mention")
            sid = m["sent_id"]
            if not isinstance(sid, int) or not (0 <= sid < len(sents)):
                raise MalformedRecord(index, f"entity {e_idx}: sent_id {sid!r} out of range")
            pos = m["pos"]
            if not (isinstance(pos, list) and len(pos) == 2 and all(isinstance(p, int) for p in pos)):
                raise MalformedRecord(index, f"entity {e_idx}: pos must be [start, end]")
            start, end = pos
            if not (0 <= start < end <= len(sents[sid])):
                raise MalformedRecord(
                    index, f"entity {e_idx}: span [{start}, {end}) outside sentence {sid}"
                )
            if m["type"] not in ENTITY_TYPES:
                raise MalformedRecord(index, f"entity {e_idx}: unknown entity type {m['type']!r}")
            if etype is None:
                etype = m["type"]
            # surface always derived from the tokens; the raw "name" field is advisory
            mentions.append(Mention(sid, start, end, _join_tokens(sents[sid][start:end])))
        entities.append(Entity(e_idx, etype, tuple(mentions)))

    labels_raw = raw["labels"]
    if not isinstance(labels_raw, list):
        raise MalformedRecord(index, "labels must be a list")
    gold = []
    n_ent = len(entities)
    for l_idx, lab in enumerate(labels_raw):
        if not isinstance(lab, dict) or "h" not in lab or "t" not in lab or "r" not in lab:
            raise MalformedRecord(index, f"label {l_idx}: missing h/t/r")
        h, t, r = lab["h"], lab["t"], lab["r"]
        if not isinstance(h, int) or not (0 <= h < n_ent):
            raise DanglingEntityIndex(index, f"label {l_idx}: head index {h!r} has no entity")
        if not isinstance(t, int) or not (0 <= t < n_ent):
            raise DanglingEntityIndex(index, f"label {l_idx}: tail index {t!r} has no entity")
        if h == t:
            raise MalformedRecord(index, f"label {l_idx}: head and tail are the same entity")
        if not isinstance(r, str) or not r:
            raise MalformedRecord(index, f"label {l_idx}: relation id must be a non-empty string")
        evidence = lab.get("evidence", [])
        if not (isinstance(evidence, list) and all(isinstance(x, int) for x in evidence)):
            raise MalformedRecord(index, f"label {l_idx}: evidence must be a list of sentence ids")
        gold.append(GoldRelation(h, t, r, tuple(evidence)))

    return Document(
        doc_id=f"{split}-{index:05d}",
        title=str(raw["title"]),
        sents=sents,
        entities=tuple(entities),
        gold=tuple(gold),
    )


def load_split(path: str | Path, split: str) -> list[Document]:
    """Load one JSON array file into documents. An empty array is a valid corpus."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise MalformedRecord(-1, f"{path}: top level must be a JSON array")
    return [_parse_record(rec, i, split) for i, rec in enumerate(data)]


def load_corpus(
    train_path: Optional[str | Path] = None,
    dev_path: Optional[str | Path] = None,
    test_path: Optional[str | Path] = None,
) -> Corpus:
    corpus = Corpus()
    if train_path is not None:
        corpus.train = load_split(train_path, "train")
    if dev_path is not None:
        corpus.dev = load_split(dev_path, "dev")
    if test_path is not None:
        corpus.test = load_split(test_path, "test")
    return corpus


def query_pairs(doc: Document, mode: str = "gold") -> list[QueryPair]:
    """Ordered entity pairs to query for a document.

    mode="gold" keeps the distinct gold-positive pairs in first-occurrence
    order; mode="all" enumerates every ordered pair of distinct entities.
    """
    if mode == "gold":
        seen: set[tuple[int, int]] = set()
        out = []
        for g in doc.gold:
            key = (g.head, g.tail)
            if key not in seen:
                seen.add(key)
                out.append(QueryPair(g.head, g.tail))
        return out
    if mode == "all":
        n = len(doc.entities)
        return [QueryPair(h, t) for h in range(n) for t in range(n) if h != t]
    raise ValueError(f"unknown query-pair mode {mode!r}")


def density_group(doc: Document, mode: str = "gold") -> str:
    """Bucket a document by |Q|: <=20 sparse, 21..40 normal, >40 dense."""
    n = len(query_pairs(doc, mode))
    if n <= 20:
        return SPARSE
    if n <= 40:
        return NORMAL
    return DENSE


def _select_spans(spans: list[tuple[int, int]]) -> list[tuple[int, int]]:
    # overlap resolution: wrap the longest span first, ties to the lower start;
    # later candidates that touch an accepted span are dropped (nested spans
    # stay unmarked inside the outer wrap)
    chosen: list[tuple[int, int]] = []
    for start, end in sorted(spans, key=lambda s: (-(s[1] - s[0]), s[0])):
        if all(end <= c_start or start >= c_end for c_start, c_end in chosen):
            chosen.append((start, end))
    chosen.sort()
    return chosen


def marked_context(doc: Document) -> str:
    """Full document text with every mention wrapped as **surface**.

    Sentences are joined with single spaces and token boundaries are kept
    as-is, so pre-tokenized punctuation stays space-separated.
    """
    by_sent: dict[int, list[tuple[int, int]]] = {}
    for ent in doc.entities:
        for m in ent.mentions:
            by_sent.setdefault(m.sent_id, []).append((m.start, m.end))
    pieces = []
    for sid, tokens in enumerate(doc.sents):
        spans = _select_spans(by_sent.get(sid, []))
        cursor = 0
        parts: list[str] = []
        for start, end in spans:
            parts.extend(tokens[cursor:start])
            parts.append("**" + _join_tokens(tokens[start:end]) + "**")
            cursor = end
        parts.extend(tokens[cursor:])
        pieces.append(_join_tokens(parts))
    return " ".join(pieces)


def _normalize_surface(text: str) -> str:
    return " ".join(text.split()).casefold()


def resolve_entity(doc: Document, surface: str) -> Optional[int]:
    """Map a generated surface back to an entity index.

    Case-insensitive, whitespace-normalized exact match against any mention;
    when several entities match, the lowest entity index wins.
    """
    want = _normalize_surface(surface)
    if not want:
        return None
    for ent in doc.entities:
        for m in ent.mentions:
            if _normalize_surface(m.surface) == want:
                return ent.idx
    return None


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
