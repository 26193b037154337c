"""Parsing model generations into resolved triplets.

The parser is total: any input decomposes into accepted triplets, recorded
defects (incomplete / irrelevant / repetition), and ignorable prose. Nothing
raises on weird text, and every non-empty line lands in exactly one bucket.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .corpus import Document, QueryPair, resolve_entity
from .relmeta import NA_RID, RelationRegistry, RelationType

STAGE_DECOMPOSED = "decomposed"
STAGE_GRAPH_ENSEMBLE = "graph_ensemble"

PIPE = "pipe"
BRACKET_EXPL = "bracket_expl"

INCOMPLETE = "incomplete"
IRRELEVANT = "irrelevant"
REPETITION = "repetition"

_SENTINEL = "cannot find a pair"
_QUOTES = "'\"‘’“”"
_WRAPPED = re.compile(r"^\*\*(.+?)\*\*\s*,\s*(.+?)\s*,\s*\*\*(.+?)\*\*$")
_BRACKET_SEP = re.compile(r",\s*\[explanation\]\s*", re.IGNORECASE)


@dataclass(frozen=True)
class Triplet:
    head_surface: str
    tail_surface: str
    head_idx: Optional[int]
    tail_idx: Optional[int]
    rid: str
    explanation: str
    stage: str
    raw_line: str = ""

    @property
    def key(self) -> tuple[Optional[int], str, Optional[int]]:
        return (self.head_idx, self.rid, self.tail_idx)

    def to_dict(self) -> dict:
        return {
            "head_surface": self.head_surface,
            "tail_surface": self.tail_surface,
            "head_idx": self.head_idx,
            "tail_idx": self.tail_idx,
            "rid": self.rid,
            "explanation": self.explanation,
            "stage": self.stage,
            "raw_line": self.raw_line,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "Triplet":
        return cls(
            head_surface=row["head_surface"],
            tail_surface=row["tail_surface"],
            head_idx=row["head_idx"],
            tail_idx=row["tail_idx"],
            rid=row["rid"],
            explanation=row["explanation"],
            stage=row["stage"],
            raw_line=row.get("raw_line", ""),
        )


@dataclass(frozen=True)
class Defect:
    kind: str
    line: str


@dataclass
class ParseReport:
    triplets: list[Triplet] = field(default_factory=list)
    defects: list[Defect] = field(default_factory=list)
    ignored: int = 0
    n_lines: int = 0

    def defect_count(self, kind: str) -> int:
        return sum(1 for d in self.defects if d.kind == kind)

    def accounted(self) -> int:
        return len(self.triplets) + len(self.defects) + self.ignored


def _is_sentinel(line: str) -> bool:
    return line.rstrip(" .").casefold() == _SENTINEL


def _strip_markers(text: str) -> str:
    text = text.strip()
    if text.startswith("**") and text.endswith("**") and len(text) > 4:
        text = text[2:-2]
    return text.strip()


def _norm_name(text: str) -> str:
    return " ".join(text.split()).casefold()


def _split_tuple(inner: str) -> Optional[tuple[str, str, str]]:
    m = _WRAPPED.match(inner.strip())
    if m:
        return m.group(1), m.group(2), m.group(3)
    # ", " first so surfaces like "27,865" survive; bare "," as a fallback
    for sep in (", ", ","):
        parts = inner.split(sep)
        if len(parts) == 3:
            return parts[0], parts[1], parts[2]
    return None


def _parse_candidate(line: str) -> Optional[tuple[str, str, str, str]]:
    """Line -> (head, relation, tail, explanation), or None on grammar failure."""
    pipe_at = line.find("|")
    bracket = _BRACKET_SEP.search(line)
    if pipe_at >= 0 and (bracket is None or pipe_at < bracket.start()):
        left, expl = line[:pipe_at], line[pipe_at + 1 :]
    elif bracket is not None:
        left, expl = line[: bracket.start()], line[bracket.end() :]
    else:
        return None
    left = left.strip()
    if not (left.startswith("(") and left.endswith(")")):
        return None
    fields = _split_tuple(left[1:-1])
    if fields is None:
        return None
    head = _strip_markers(fields[0])
    rel = fields[1].strip().strip(_QUOTES).strip()
    tail = _strip_markers(fields[2])
    if not head or not rel or not tail:
        return None
    return head, rel, tail, expl.strip()


def _resolve_relation(
    rel_name: str,
    registry: RelationRegistry,
    stage: str,
    prompted: Optional[RelationType],
) -> Optional[str]:
    """Relation id for a generated relation name, or None when unusable."""
    if stage == STAGE_DECOMPOSED:
        assert prompted is not None, "decomposed parsing needs the prompted relation"
        if _norm_name(rel_name) == _norm_name(prompted.name):
            return prompted.rid
        return None
    if _norm_name(rel_name) in ("na", "no relation"):
        return NA_RID
    hit = registry.by_name(rel_name)
    return hit.rid if hit is not None else None


def parse_generation(
    text: str,
    doc: Document,
    registry: RelationRegistry,
    stage: str = STAGE_DECOMPOSED,
    prompted: Optional[RelationType] = None,
    seen: Optional[set] = None,
) -> ParseReport:
    """Classify every non-empty line of a generation.

    Order per line: grammar failure or an off-prompt/unknown relation name is
    incomplete; an unresolvable surface is irrelevant; a duplicate resolved
    key is a repetition (the first occurrence is kept); otherwise accepted.
    """
    report = ParseReport()
    if seen is None:
        seen = set()
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        report.n_lines += 1
        if _is_sentinel(line):
            report.ignored += 1
            continue
        if not line.startswith("("):
            report.ignored += 1
            continue
        cand = _parse_candidate(line)
        if cand is None:
            report.defects.append(Defect(INCOMPLETE, line))
            continue
        head, rel_name, tail, expl = cand
        rid = _resolve_relation(rel_name, registry, stage, prompted)
        if rid is None:
            report.defects.append(Defect(INCOMPLETE, line))
            continue
        head_idx = resolve_entity(doc, head)
        tail_idx = resolve_entity(doc, tail)
        if head_idx is None or tail_idx is None:
            report.defects.append(Defect(IRRELEVANT, line))
            continue
        key = (head_idx, rid, tail_idx)
        if key in seen:
            report.defects.append(Defect(REPETITION, line))
            continue
        seen.add(key)
        report.triplets.append(
            Triplet(
                head_surface=head,
                tail_surface=tail,
                head_idx=head_idx,
                tail_idx=tail_idx,
                rid=rid,
                explanation=expl,
                stage=stage,
                raw_line=line,
            )
        )
    return report


def render_triplet(t: Triplet, registry: RelationRegistry, style: str = PIPE) -> str:
    """Canonical text for a triplet; parse_generation round-trips it."""
    name = registry.get(t.rid).name if t.rid in registry else t.rid
    if style == PIPE:
        return f"(**{t.head_surface}**, {name}, **{t.tail_surface}**) | {t.explanation}"
    if style == BRACKET_EXPL:
        return f"({t.head_surface}, {name}, {t.tail_surface}), [explanation] {t.explanation}"
    raise ValueError(f"unknown triplet style {style!r}")


def parse_mask_answer(
    text: str,
    doc: Document,
    missing: QueryPair,
    registry: RelationRegistry,
) -> Optional[Triplet]:
    """First generated line that answers the queried pair, orientation-strict.

    A relation of "NA" / "no relation" yields an NA triplet (an accepted
    "nothing there" verdict); no matching line yields None.
    """
    for raw in text.splitlines():
        line = raw.strip()
        if not line or not line.startswith("("):
            continue
        cand = _parse_candidate(line)
        if cand is None:
            continue
        head, rel_name, tail, expl = cand
        rid = _resolve_relation(rel_name, registry, STAGE_GRAPH_ENSEMBLE, None)
        if rid is None:
            continue
        head_idx = resolve_entity(doc, head)
        tail_idx = resolve_entity(doc, tail)
        if head_idx != missing.head or tail_idx != missing.tail:
            continue
        return Triplet(
            head_surface=head,
            tail_surface=tail,
            head_idx=head_idx,
            tail_idx=tail_idx,
            rid=rid,
            explanation=expl,
            stage=STAGE_GRAPH_ENSEMBLE,
            raw_line=line,
        )
    return None
