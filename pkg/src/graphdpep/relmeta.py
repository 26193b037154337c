"""Relation-type registry and type-injection explanation construction.

The registry is loaded from a JSON file mapping relation ids to curated
metadata. Descriptions are stored with "this subject"/"the object" wording
already in place; alias entries are full sentence patterns with ``{subject}``
and ``{object}`` slots used to linearize a triplet into natural text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, Optional

from .errors import (
    AliasOutOfRange,
    BadAliasPhrase,
    DuplicateRid,
    MissingDescription,
    NAUnverbalizable,
)

NA_RID = "NA"

_TYPE_PHRASES = {
    "PER": "a person",
    "ORG": "an organization",
    "LOC": "a location",
    "TIME": "a time expression",
    "NUM": "a number",
    "MISC": "a miscellaneous entity",
}


@dataclass(frozen=True)
class RelationType:
    rid: str
    name: str
    description: str
    aliases: tuple[str, ...] = ()
    subj_types: tuple[str, ...] = ()
    obj_types: tuple[str, ...] = ()

    @property
    def is_na(self) -> bool:
        return self.rid == NA_RID


@dataclass
class RelationRegistry:
    """All relation types plus the synthesized NA, iterated in rid order."""

    _by_rid: dict[str, RelationType] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._by_rid = dict(self._by_rid)
        if NA_RID not in self._by_rid:
            self._by_rid[NA_RID] = RelationType(NA_RID, "NA", "")
        self._order = sorted(self._by_rid)
        self._by_name = {r.name.casefold(): r for r in self._by_rid.values()}

    def __len__(self) -> int:
        return len(self._by_rid)

    def __iter__(self) -> Iterator[RelationType]:
        return (self._by_rid[rid] for rid in self._order)

    def __contains__(self, rid: str) -> bool:
        return rid in self._by_rid

    def get(self, rid: str) -> RelationType:
        return self._by_rid[rid]

    def by_name(self, name: str) -> Optional[RelationType]:
        """Case-insensitive lookup by relation name; None when unknown."""
        return self._by_name.get(" ".join(name.split()).casefold())

    def non_na(self) -> list[RelationType]:
        return [r for r in self if not r.is_na]

    @property
    def na(self) -> RelationType:
        return self._by_rid[NA_RID]


def _validate_alias(rid: str, phrase: str) -> None:
    if phrase.count("{subject}") != 1 or phrase.count("{object}") != 1:
        raise BadAliasPhrase(
            f"{rid}: alias phrase must contain {{subject}} and {{object}} exactly once: {phrase!r}"
        )


def _dedup_object(pairs: list[tuple[str, object]]) -> dict:
    d: dict = {}
    for k, v in pairs:
        if k in d:
            raise DuplicateRid(f"duplicate key {k!r} in metadata file")
        d[k] = v
    return d


def load_registry(path: str | Path) -> RelationRegistry:
    """Load curated relation metadata and synthesize the NA type."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh, object_pairs_hook=_dedup_object)
    if not isinstance(data, dict):
        raise MissingDescription(f"{path}: top level must be a JSON object")
    by_rid: dict[str, RelationType] = {}
    for rid, meta in data.items():
        if rid == NA_RID:
            raise DuplicateRid("NA is synthesized at load time and may not appear in the file")
        if not isinstance(meta, dict) or "name" not in meta:
            raise MissingDescription(f"{rid}: metadata must be an object with a name")
        description = meta.get("description", "")
        if not description:
            raise MissingDescription(f"{rid}: empty description")
        aliases = tuple(meta.get("aliases", []))
        for phrase in aliases:
            _validate_alias(rid, phrase)
        by_rid[rid] = RelationType(
            rid=rid,
            name=meta["name"],
            description=description,
            aliases=aliases,
            subj_types=tuple(meta.get("subj_types", [])),
            obj_types=tuple(meta.get("obj_types", [])),
        )
    return RelationRegistry(by_rid)


def default_registry_path() -> Path:
    return Path(str(resources.files("graphdpep").joinpath("data/relation_info.json")))


def load_default_registry() -> RelationRegistry:
    return load_registry(default_registry_path())


def verbalize(rel: RelationType) -> str:
    """One sentence stating what the relation means, placeholders intact."""
    if rel.is_na:
        raise NAUnverbalizable("NA carries no description to verbalize")
    return f'Because the relation "{rel.name}" means {rel.description}.'


def _canonical_phrase(rel: RelationType) -> str:
    return f'{{subject}} has the relation "{rel.name}" with {{object}}'


def linearize(rel: RelationType, head_surface: str, tail_surface: str, alias_index: int = 0) -> str:
    """Render one triplet as a sentence with the two surfaces slotted in.

    alias_index 0 uses a generic pattern built from the canonical name;
    index i >= 1 uses the relation's (i-1)-th alias phrase.
    """
    if rel.is_na:
        raise NAUnverbalizable("NA cannot be linearized")
    if not (0 <= alias_index < 1 + len(rel.aliases)):
        raise AliasOutOfRange(
            f"{rel.rid}: alias index {alias_index} out of range (have {len(rel.aliases)} aliases)"
        )
    phrase = _canonical_phrase(rel) if alias_index == 0 else rel.aliases[alias_index - 1]
    return phrase.replace("{subject}", head_surface).replace("{object}", tail_surface) + "."


def type_phrase(etype: str) -> str:
    return _TYPE_PHRASES.get(etype, "an entity")


def compose_explanation(
    rel: RelationType,
    head_surface: str,
    tail_surface: str,
    head_etype: str,
    tail_etype: str,
    alias_index: int = 0,
) -> str:
    """Demo explanation body: relation meaning, entity types, linearized triplet.

    The leading "Because" is left to the prompt template.
    """
    desc = rel.description
    desc = desc[0].lower() + desc[1:] if desc else desc
    return (
        f'the relation "{rel.name}" means {desc}. '
        f"{head_surface} is {type_phrase(head_etype)}. "
        f"{tail_surface} is {type_phrase(tail_etype)}. "
        f"{linearize(rel, head_surface, tail_surface, alias_index)}"
    )
