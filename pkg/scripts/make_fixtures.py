#!/usr/bin/env python3
"""Regenerate the checked-in test fixtures.

Produces, under tests/fixtures/:
  - alton.json             two-document corpus split (Alton / Herzogenbusch)
  - golden_registry.json   seven-relation metadata file for the golden prompts
  - golden/decomposed_prompt.txt
  - golden/graph_ensemble_prompt.txt
  - e2e/                   five-document replay pipeline fixture (corpus,
                           registry, pool, replay.jsonl, run config)

The golden prompt texts are hand-maintained literals; the script verifies
that the package's prompt builders reproduce them byte-for-byte before
writing anything, so a drift in either the transcription or the builders
fails loudly here first.

Usage: python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"

sys.path.insert(0, str(ROOT / "src"))

from graphdpep.corpus import load_split, marked_context  # noqa: E402
from graphdpep.extract import STAGE_DECOMPOSED, Triplet  # noqa: E402
from graphdpep.gog import AssociationSubgraph  # noqa: E402
from graphdpep.corpus import QueryPair  # noqa: E402
from graphdpep.prompts import (  # noqa: E402
    Demo,
    build_decomposed_prompt,
    build_graph_ensemble_prompt,
)
from graphdpep.relmeta import load_registry  # noqa: E402


# --------------------------------------------------------------------------
# two-document golden corpus
# --------------------------------------------------------------------------

def _sent(text: str) -> list[str]:
    return text.split(" ")

ALTON_SENTS = [
    _sent("Alton is a city on the Mississippi River in Madison County , Illinois ,"
          " United States , about north of St. Louis , Missouri ."),
    _sent("The population was 27,865 at the 2010 census ."),
    _sent("It is a part of the Metro - East region of the Greater St. Louis"
          " metropolitan area ."),
    _sent("It is famous for its limestone bluffs along the river north of the city ,"
          " for its role preceding and during the American Civil War , and as the"
          " home town of jazz musician Miles Davis and Robert Wadlow , the tallest"
          " known person in history ."),
    _sent("It was the site of the last Abraham Lincoln and Stephen Douglas debate"
          " in October 1858 ."),
    _sent("The former state penitentiary in Alton was used during the Civil War to"
          " hold up to 12,000 Confederate prisoners of war ."),
]

# (type, [(sent_id, start, end)]) in first-appearance order
ALTON_ENTITIES = [
    ("LOC",  [(0, 0, 1), (5, 5, 6)]),      # Alton
    ("LOC",  [(0, 6, 8)]),                  # Mississippi River
    ("LOC",  [(0, 9, 11)]),                 # Madison County
    ("LOC",  [(0, 12, 13)]),                # Illinois
    ("LOC",  [(0, 14, 16)]),                # United States
    ("LOC",  [(0, 20, 22)]),                # St. Louis
    ("LOC",  [(0, 23, 24)]),                # Missouri
    ("NUM",  [(1, 3, 4)]),                  # 27,865
    ("TIME", [(1, 6, 7)]),                  # 2010
    ("LOC",  [(2, 6, 9)]),                  # Metro - East
    ("LOC",  [(2, 12, 15)]),                # Greater St. Louis
    ("MISC", [(3, 22, 25), (5, 10, 12)]),   # American Civil War / Civil War
    ("PER",  [(3, 34, 36)]),                # Miles Davis
    ("PER",  [(3, 37, 39)]),                # Robert Wadlow
    ("PER",  [(4, 7, 9)]),                  # Abraham Lincoln
    ("PER",  [(4, 10, 12)]),                # Stephen Douglas
    ("TIME", [(4, 14, 16)]),                # October 1858
    ("NUM",  [(5, 16, 17)]),                # 12,000
    ("ORG",  [(5, 17, 18)]),                # Confederate
]

ALTON_LABELS = [
    {"h": 4, "t": 14, "r": "P6", "evidence": [4]},    # US head-of-gov Lincoln
    {"h": 12, "t": 0, "r": "P19", "evidence": [3]},   # Davis born in Alton
    {"h": 13, "t": 0, "r": "P551", "evidence": [3]},  # Wadlow resides in Alton
    {"h": 0, "t": 2, "r": "P131", "evidence": [0]},   # Alton in Madison County
    {"h": 0, "t": 3, "r": "P131", "evidence": [0]},   # Alton in Illinois
    {"h": 0, "t": 4, "r": "P17", "evidence": [0]},    # Alton in the US
    {"h": 13, "t": 4, "r": "P27", "evidence": [0, 3]},
    {"h": 12, "t": 4, "r": "P27", "evidence": [0, 3]},
]

HERZO_SENTS = [
    _sent("Herzogenbusch concentration camp ( , , ) was a Nazi concentration camp"
          " located in Vught near the city of ' s - Hertogenbosch , Netherlands ."),
    _sent("Herzogenbusch was , with Natzweiler - Struthof in occupied France , the"
          " only concentration camp run directly by the SS in western Europe"
          " outside Germany ."),
    _sent("The camp was first used in 1943 and held 31,000 prisoners ."),
    _sent("749 prisoners died in the camp , and the others were transferred to"
          " other camps shortly before the camp was liberated by the Allied Forces"
          " in 1944 ."),
    _sent("After the war the camp was used as a prison for Germans and Dutch"
          " collaborators ."),
    _sent("Today there is a visitors ' center with exhibitions and a national"
          " monument remembering the camp and its victims ."),
    _sent("The camp is now a museum ."),
]

HERZO_ENTITIES = [
    ("LOC",  [(0, 0, 1), (1, 0, 1)]),   # Herzogenbusch
    ("ORG",  [(0, 9, 10)]),             # Nazi
    ("LOC",  [(0, 14, 15)]),            # Vught
    ("LOC",  [(0, 20, 23)]),            # s - Hertogenbosch
    ("LOC",  [(0, 24, 25)]),            # Netherlands
    ("LOC",  [(1, 4, 7)]),              # Natzweiler - Struthof
    ("LOC",  [(1, 9, 10)]),             # France
    ("ORG",  [(1, 19, 20)]),            # SS
    ("LOC",  [(1, 22, 23)]),            # Europe
    ("LOC",  [(1, 24, 25)]),            # Germany
    ("TIME", [(2, 6, 7)]),              # 1943
    ("NUM",  [(2, 9, 10)]),             # 31,000
    ("NUM",  [(3, 0, 1)]),              # 749
    ("ORG",  [(3, 23, 25)]),            # Allied Forces
    ("TIME", [(3, 26, 27)]),            # 1944
    ("MISC", [(4, 11, 12)]),            # Germans
    ("MISC", [(4, 13, 14)]),            # Dutch
]

HERZO_LABELS = [
    {"h": 0, "t": 4, "r": "P17", "evidence": [0]},
    {"h": 0, "t": 2, "r": "P131", "evidence": [0]},
    {"h": 2, "t": 4, "r": "P17", "evidence": [0]},
    {"h": 3, "t": 4, "r": "P17", "evidence": [0]},
    {"h": 5, "t": 6, "r": "P17", "evidence": [1]},
]


def _record(title: str, sents, entities, labels) -> dict:
    vertex_set = []
    for etype, mentions in entities:
        cluster = []
        for sent_id, start, end in mentions:
            assert 0 <= start < end <= len(sents[sent_id]), (title, sent_id, start, end)
            cluster.append(
                {
                    "name": " ".join(sents[sent_id][start:end]),
                    "sent_id": sent_id,
                    "pos": [start, end],
                    "type": etype,
                }
            )
        vertex_set.append(cluster)
    return {"title": title, "sents": sents, "vertexSet": vertex_set, "labels": labels}


GOLDEN_REGISTRY = {
    "P6": {
        "name": "head of government",
        "description": "The object is the head of the executive power of this subject",
        "aliases": ["{object} is the head of the government of the {subject}"],
        "subj_types": ["LOC", "ORG"],
        "obj_types": ["PER"],
    },
    "P17": {
        "name": "country",
        "description": "The object is a sovereign state that this subject is in",
        "aliases": ["{subject} is located in the host country, the {object}"],
        "subj_types": ["LOC", "ORG", "MISC"],
        "obj_types": ["LOC"],
    },
    "P19": {
        "name": "place of birth",
        "description": "The object is the location where this subject was born",
        "aliases": ["{subject} was born in {object}"],
        "subj_types": ["PER"],
        "obj_types": ["LOC"],
    },
    "P22": {
        "name": "father",
        "description": "The object is the male parent of this subject",
        "aliases": ["{object} is the father of {subject}"],
        "subj_types": ["PER"],
        "obj_types": ["PER"],
    },
    "P27": {
        "name": "country of citizenship",
        "description": "The object is a country that recognizes this subject as its citizen",
        "aliases": ["{subject} has the citizenship of country, {object}"],
        "subj_types": ["PER"],
        "obj_types": ["LOC"],
    },
    "P131": {
        "name": "located in the administrative territorial entity",
        "description": "The object is an administrative territorial entity in which this subject is located",
        "aliases": ["{subject} is a city of {object}"],
        "subj_types": ["LOC"],
        "obj_types": ["LOC"],
    },
    "P551": {
        "name": "residence",
        "description": "The object is a place where this subject is or has been a resident",
        "aliases": ["{subject} is a residence in {object}"],
        "subj_types": ["PER"],
        "obj_types": ["LOC"],
    },
}


# --------------------------------------------------------------------------
# golden prompt texts (hand-maintained transcriptions)
# --------------------------------------------------------------------------

ALTON_MARKED = (
    "**Alton** is a city on the **Mississippi River** in **Madison County** ,"
    " **Illinois** , **United States** , about north of **St. Louis** ,"
    " **Missouri** . The population was **27,865** at the **2010** census ."
    " It is a part of the **Metro - East** region of the **Greater St. Louis**"
    " metropolitan area . It is famous for its limestone bluffs along the river"
    " north of the city , for its role preceding and during the"
    " **American Civil War** , and as the home town of jazz musician"
    " **Miles Davis** and **Robert Wadlow** , the tallest known person in"
    " history . It was the site of the last **Abraham Lincoln** and"
    " **Stephen Douglas** debate in **October 1858** . The former state"
    " penitentiary in **Alton** was used during the **Civil War** to hold up to"
    " **12,000** **Confederate** prisoners of war ."
)

HERZO_MARKED = (
    "**Herzogenbusch** concentration camp ( , , ) was a **Nazi** concentration"
    " camp located in **Vught** near the city of ' **s - Hertogenbosch** ,"
    " **Netherlands** . **Herzogenbusch** was , with **Natzweiler - Struthof**"
    " in occupied **France** , the only concentration camp run directly by the"
    " **SS** in western **Europe** outside **Germany** . The camp was first"
    " used in **1943** and held **31,000** prisoners . **749** prisoners died"
    " in the camp , and the others were transferred to other camps shortly"
    " before the camp was liberated by the **Allied Forces** in **1944** ."
    " After the war the camp was used as a prison for **Germans** and **Dutch**"
    " collaborators . Today there is a visitors ' center with exhibitions and a"
    " national monument remembering the camp and its victims . The camp is now"
    " a museum ."
)

P6_DEMO_EXPLANATION = (
    "relation “head of government” means the object is the head of the"
    " executive power of this suject, which can be A town, city, municipality,"
    " state, country, or other governmental body. Abraham Lincoln is a person."
    " United States is a country. Abraham Lincoln is the presendent of the"
    " United States."
)

GOLDEN_DECOMPOSED = (
    "Based on the context, assign the relation “head of government” for"
    " possible entity pairs and entities are marked in \"**entity**\". To help"
    " you, I provide examples of relation “head of government”.\n"
    "Examples:\n"
    "\n"
    f"[context]:{ALTON_MARKED}\n"
    "\n"
    "[Relation]:\n"
    "(**United States**, 'head of government', **Abraham Lincoln**) | Because"
    f" {P6_DEMO_EXPLANATION}\n"
    "\n"
    f"[context]:{HERZO_MARKED}\n"
    "\n"
    "[Relation]:"
)

RELATION_LIST = (
    "[‘located in the administrative territorial entity’, ‘country’,"
    " ‘place of birth’, ‘father’, ‘country of citizenship’, ‘residence’,"
    " ‘head of government’]"
)

ASSOCIATION_LINES = [
    "(**Miles Davis**, 'place of birth', **Alton**) | Because Alton is the"
    " home town of Miles Davis, which indicates Robert Wadlow was born in"
    " Alton.",
    "(**Robert Wadlow**, 'residence', **Alton**) | Because Alton is the home"
    " town of Robert Wadlow, which indicates Robert Wadlow is a residence in"
    " Alton.",
    "(**Alton**, 'located in the administrative territorial entity',"
    " **Madison County**) | Because Alton is a city of Madison County.",
    "(**Alton**, 'country', **United States**) | Because Alton is a city of"
    " Madison County, Illinois, United States.",
    "(**Robert Wadlow**, 'country of citizenship', **United States**) |"
    " Because Alton is a city of United States and Robert Wadlow is a"
    " residence in Alton, then Robert Wadlow has the citizenship of country,"
    " United States.",
    "(**Miles Davis**, 'country of citizenship', **United States**) | Because"
    " Alton is a city of United States and Miles Davis's home toen is Alton,"
    " then Miles Davis has the citizenship of country, United States.",
    "(**Alton**, 'located in the administrative territorial entity',"
    " **United States**) | Because Alton is a city of United States.",
    "(**Alton**, 'located in the administrative territorial entity',"
    " **Illinois**) | Because Alton is a city of Illinois.",
]

GOLDEN_GRAPH_ENSEMBLE = (
    "From the relation list assign a label for the query pair given the"
    " associated relation triplets that are extracted from the context."
    " Explain the assignment of query pair.\n"
    f"{RELATION_LIST}\n"
    "\n"
    f"[Context]: {ALTON_MARKED}\n"
    "\n"
    "[Association Triplets]:\n"
    + "\n".join(ASSOCIATION_LINES)
    + "\n"
    "\n"
    "[Query Pair]:\n"
    "(**Robert Wadlow**, [MASK], **Alton**) | [Explanation]\n"
    "\n"
    "[Answer]:"
)

# (head_idx, rid, tail_idx) of each association line above, vs the Alton doc
ASSOCIATION_TRIPLETS = [
    (12, "P19", 0),
    (13, "P551", 0),
    (0, "P131", 2),
    (0, "P17", 4),
    (13, "P27", 4),
    (12, "P27", 4),
    (0, "P131", 4),
    (0, "P131", 3),
]


def verify_goldens() -> None:
    registry = load_registry(FIXTURES / "golden_registry.json")
    docs = load_split(FIXTURES / "alton.json", "test")
    alton, herzo = docs

    assert marked_context(alton) == ALTON_MARKED, "Alton marked context drifted"
    assert marked_context(herzo) == HERZO_MARKED, "Herzogenbusch marked context drifted"

    demo = Demo(
        doc=alton,
        triplets=(("United States", "P6", "Abraham Lincoln", P6_DEMO_EXPLANATION),),
    )
    prompt = build_decomposed_prompt(registry.get("P6"), [demo], herzo, registry)
    assert prompt.text == GOLDEN_DECOMPOSED, _first_diff(prompt.text, GOLDEN_DECOMPOSED)

    triplets = []
    for line, (h, rid, t) in zip(ASSOCIATION_LINES, ASSOCIATION_TRIPLETS):
        explanation = line.split(" | ", 1)[1]
        triplets.append(
            Triplet(
                head_surface=alton.entities[h].surface,
                tail_surface=alton.entities[t].surface,
                head_idx=h,
                tail_idx=t,
                rid=rid,
                explanation=explanation,
                stage=STAGE_DECOMPOSED,
            )
        )
    pair = QueryPair(head=13, tail=0)
    sub = AssociationSubgraph(pair=pair, triplets=tuple(triplets), reasons=())
    prompt = build_graph_ensemble_prompt(pair, sub, [], alton, registry)
    assert prompt.text == GOLDEN_GRAPH_ENSEMBLE, _first_diff(
        prompt.text, GOLDEN_GRAPH_ENSEMBLE
    )


def _first_diff(got: str, want: str) -> str:
    for i, (a, b) in enumerate(zip(got, want)):
        if a != b:
            return f"first diff at {i}: got {got[i:i+60]!r} want {want[i:i+60]!r}"
    return f"length mismatch: got {len(got)} want {len(want)}"


def write_goldens() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / "golden").mkdir(exist_ok=True)

    records = [
        _record("Alton", ALTON_SENTS, ALTON_ENTITIES, ALTON_LABELS),
        _record(
            "Herzogenbusch concentration camp",
            HERZO_SENTS,
            HERZO_ENTITIES,
            HERZO_LABELS,
        ),
    ]
    with open(FIXTURES / "alton.json", "w", encoding="utf-8") as fh:
        json.dump(records, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")

    with open(FIXTURES / "golden_registry.json", "w", encoding="utf-8") as fh:
        json.dump(GOLDEN_REGISTRY, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")

    for name, text in (
        ("decomposed_prompt.txt", GOLDEN_DECOMPOSED),
        ("graph_ensemble_prompt.txt", GOLDEN_GRAPH_ENSEMBLE),
    ):
        with open(FIXTURES / "golden" / name, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")

    # the exact builder inputs, so tests can regenerate the goldens
    inputs = {
        "decomposed": {
            "rid": "P6",
            "demo_doc": 0,
            "target_doc": 1,
            "demo_triplets": [
                ["United States", "P6", "Abraham Lincoln", P6_DEMO_EXPLANATION]
            ],
        },
        "ensemble": {
            "target_doc": 0,
            "pair": {"head": 13, "tail": 0},
            "triplets": [
                {
                    "head_idx": h,
                    "rid": rid,
                    "tail_idx": t,
                    "explanation": line.split(" | ", 1)[1],
                }
                for line, (h, rid, t) in zip(ASSOCIATION_LINES, ASSOCIATION_TRIPLETS)
            ],
        },
    }
    with open(FIXTURES / "golden" / "prompt_inputs.json", "w", encoding="utf-8") as fh:
        json.dump(inputs, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def main() -> None:
    write_goldens()
    verify_goldens()
    from e2e_fixture import write_e2e  # local sibling module

    write_e2e(FIXTURES / "e2e")
    print("fixtures written and verified under", FIXTURES)


if __name__ == "__main__":
    main()
