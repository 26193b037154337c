"""Relation registry loading, verbalization, and triplet linearization."""

from __future__ import annotations

import json

import pytest

from graphdpep.errors import (
    AliasOutOfRange,
    BadAliasPhrase,
    DuplicateRid,
    MissingDescription,
    NAUnverbalizable,
)
from graphdpep.relmeta import (
    NA_RID,
    RelationRegistry,
    RelationType,
    compose_explanation,
    load_default_registry,
    load_registry,
    linearize,
    type_phrase,
    verbalize,
)


def _write_registry(tmp_path, data):
    path = tmp_path / "rel.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def test_default_registry_size():
    reg = load_default_registry()
    assert len(reg) == 97
    assert len(reg.non_na()) == 96
    assert reg.na.rid == NA_RID


def test_iteration_sorted_by_rid(golden_registry):
    rids = [r.rid for r in golden_registry]
    assert rids == sorted(rids)
    assert NA_RID in rids


def test_empty_object_gives_na_only(tmp_path):
    reg = load_registry(_write_registry(tmp_path, {}))
    assert len(reg) == 1
    assert reg.get(NA_RID).is_na


def test_duplicate_rid_rejected(tmp_path):
    path = tmp_path / "rel.json"
    entry = '{"name": "country", "description": "d"}'
    path.write_text(f'{{"P17": {entry}, "P17": {entry}}}', encoding="utf-8")
    with pytest.raises(DuplicateRid):
        load_registry(path)


def test_na_entry_in_file_rejected(tmp_path):
    data = {"NA": {"name": "NA", "description": "x"}}
    with pytest.raises(DuplicateRid):
        load_registry(_write_registry(tmp_path, data))


def test_missing_description_rejected(tmp_path):
    data = {"P17": {"name": "country"}}
    with pytest.raises(MissingDescription):
        load_registry(_write_registry(tmp_path, data))


def test_bad_alias_phrase_rejected(tmp_path):
    data = {
        "P17": {
            "name": "country",
            "description": "The object is a sovereign state",
            "aliases": ["{subject} is in a country"],  # no {object}
        }
    }
    with pytest.raises(BadAliasPhrase):
        load_registry(_write_registry(tmp_path, data))


def test_by_name_is_case_insensitive(golden_registry):
    assert golden_registry.by_name("Head Of Government").rid == "P6"
    assert golden_registry.by_name("  head   of government ").rid == "P6"
    assert golden_registry.by_name("nonexistent") is None


# ---------------------------------------------------------------------------
# verbalization
# ---------------------------------------------------------------------------

def test_verbalize_country():
    reg = load_default_registry()
    text = verbalize(reg.get("P17"))
    assert "The object is a sovereign state that this subject is in" in text
    assert text.startswith('Because the relation "country" means')


def test_verbalize_basin_country():
    reg = load_default_registry()
    text = verbalize(reg.get("P205"))
    assert "has drainage to/from or borders" in text


def test_verbalize_na_raises():
    reg = load_default_registry()
    with pytest.raises(NAUnverbalizable):
        verbalize(reg.na)


def test_verbalize_mentions_both_roles_everywhere():
    reg = load_default_registry()
    for rel in reg.non_na():
        text = verbalize(rel)
        assert "subject" in text, rel.rid
        assert "object" in text, rel.rid


# ---------------------------------------------------------------------------
# linearization
# ---------------------------------------------------------------------------

def test_linearize_host_country_alias():
    reg = load_default_registry()
    out = linearize(reg.get("P17"), "Mammoth", "United States", 1)
    assert out == "Mammoth is located in the host country, the United States."


def test_linearize_canonical_pattern():
    reg = load_default_registry()
    out = linearize(reg.get("P6"), "Abraham Lincoln", "United States", 0)
    assert out == (
        'Abraham Lincoln has the relation "head of government" with United States.'
    )
    assert "head" in out


def test_linearize_alias_out_of_range():
    reg = load_default_registry()
    rel = reg.get("P17")
    assert len(rel.aliases) == 2
    with pytest.raises(AliasOutOfRange):
        linearize(rel, "a", "b", 99)
    with pytest.raises(AliasOutOfRange):
        linearize(rel, "a", "b", -1)


def test_linearize_na_raises():
    reg = load_default_registry()
    with pytest.raises(NAUnverbalizable):
        linearize(reg.na, "a", "b", 0)


def test_linearize_slots_exactly_once_no_template_leakage():
    reg = load_default_registry()
    head, tail = "Zanzibar", "Quixote"
    for rel in reg.non_na():
        for i in range(1 + len(rel.aliases)):
            out = linearize(rel, head, tail, i)
            assert out.count(head) == 1, (rel.rid, i)
            assert out.count(tail) == 1, (rel.rid, i)
            assert "the subject" not in out, (rel.rid, i)
            assert "the object" not in out, (rel.rid, i)
            assert out.endswith(".")


# ---------------------------------------------------------------------------
# explanations
# ---------------------------------------------------------------------------

def test_type_phrase_covers_known_and_unknown():
    assert type_phrase("PER") == "a person"
    assert type_phrase("LOC") == "a location"
    assert type_phrase("XYZ") == "an entity"


def test_compose_explanation_shape(golden_registry):
    rel = golden_registry.get("P19")
    out = compose_explanation(rel, "Miles Davis", "Alton", "PER", "LOC", 1)
    assert out.startswith('the relation "place of birth" means the object is')
    assert "Miles Davis is a person." in out
    assert "Alton is a location." in out
    assert out.endswith("Miles Davis was born in Alton.")


def test_registry_rejects_non_object_top_level(tmp_path):
    path = tmp_path / "rel.json"
    path.write_text("[]", encoding="utf-8")
    with pytest.raises(MissingDescription):
        load_registry(path)


def test_registry_equivalence_of_construction(golden_registry):
    # same content -> same iteration order, regardless of insertion order
    rels = {r.rid: r for r in golden_registry if not r.is_na}
    reversed_reg = RelationRegistry(dict(reversed(list(rels.items()))))
    assert [r.rid for r in reversed_reg] == [r.rid for r in golden_registry]
