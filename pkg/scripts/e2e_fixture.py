"""Build the five-document end-to-end replay fixture.

A scripted backend answers the real pipeline's prompts (identified by
relation name and target context), the resulting generation cache becomes
replay.jsonl, and the fixture is immediately re-verified through the real
replay backend: two runs must be byte-identical and the full run's micro
recall must strictly beat the decomposed-only run's.

The five test documents exercise, in order: an empty-subgraph fill-in, a
half-successful fill-in (one pair answered NA stays missing), a fully
covered document, a document with no gold pairs, and a defect-laden
generation (repetition / irrelevant / incomplete lines) with a relation
group large enough for outlier scoring.
"""

from __future__ import annotations

import json
import re
import shutil
import tempfile
from dataclasses import asdict
from pathlib import Path
from unittest import mock

from graphdpep import pipeline as pipeline_mod
from graphdpep.corpus import load_split, marked_context, resolve_entity
from graphdpep.llm import GenerationResponse
from graphdpep.pipeline import RunConfig, run_pipeline
from graphdpep.relmeta import load_registry


def _sent(text: str) -> list[str]:
    return text.split(" ")


def _record(title, sents, entities, labels) -> dict:
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


E2E_REGISTRY = {
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
    "P205": {
        "name": "basin country",
        "description": "The object is a country that has drainage to/from or borders the lake subject or the river subject",
        "aliases": ["{subject} has a drainage basin in the country, the {object}"],
        "subj_types": ["LOC"],
        "obj_types": ["LOC"],
    },
}

TRAIN_DOCS = [
    _record(
        "Springfield",
        [
            _sent("Springfield is the capital of Illinois in the United States ."),
            _sent("Lincoln was born in Kentucky and led the United States ."),
        ],
        [
            ("LOC", [(0, 0, 1)]),               # Springfield
            ("LOC", [(0, 5, 6)]),               # Illinois
            ("LOC", [(0, 8, 10), (1, 8, 10)]),  # United States
            ("PER", [(1, 0, 1)]),               # Lincoln
            ("LOC", [(1, 4, 5)]),               # Kentucky
        ],
        [
            {"h": 0, "t": 2, "r": "P17", "evidence": [0]},
            {"h": 1, "t": 2, "r": "P17", "evidence": [0]},
            {"h": 3, "t": 4, "r": "P19", "evidence": [1]},
            {"h": 2, "t": 3, "r": "P6", "evidence": [1]},
        ],
    ),
    _record(
        "Paris",
        [
            _sent("Paris is the capital of France ."),
            _sent("Macron was born in Paris and governs France ."),
        ],
        [
            ("LOC", [(0, 0, 1), (1, 4, 5)]),   # Paris
            ("LOC", [(0, 5, 6), (1, 7, 8)]),   # France
            ("PER", [(1, 0, 1)]),              # Macron
        ],
        [
            {"h": 0, "t": 1, "r": "P17", "evidence": [0]},
            {"h": 1, "t": 2, "r": "P6", "evidence": [1]},
            {"h": 2, "t": 0, "r": "P19", "evidence": [1]},
        ],
    ),
    _record(
        "Berlin",
        [
            _sent("Berlin is the capital of Germany ."),
            _sent("Merkel was born in Hamburg ."),
        ],
        [
            ("LOC", [(0, 0, 1)]),   # Berlin
            ("LOC", [(0, 5, 6)]),   # Germany
            ("PER", [(1, 0, 1)]),   # Merkel
            ("LOC", [(1, 4, 5)]),   # Hamburg
        ],
        [
            {"h": 0, "t": 1, "r": "P17", "evidence": [0]},
            {"h": 1, "t": 2, "r": "P6", "evidence": [1]},
            {"h": 2, "t": 3, "r": "P19", "evidence": [1]},
        ],
    ),
]

TEST_DOCS = [
    _record(
        "Mammoth Cave",
        [_sent("Mammoth Cave is a national park in the United States .")],
        [
            ("LOC", [(0, 0, 2)]),    # Mammoth Cave
            ("LOC", [(0, 8, 10)]),   # United States
        ],
        [{"h": 0, "t": 1, "r": "P17", "evidence": [0]}],
    ),
    _record(
        "Danube",
        [
            _sent("The Danube flows through Austria and Germany ."),
            _sent("Vienna is the capital of Austria on the Danube ."),
        ],
        [
            ("LOC", [(0, 1, 2), (1, 8, 9)]),   # Danube
            ("LOC", [(0, 4, 5), (1, 5, 6)]),   # Austria
            ("LOC", [(0, 6, 7)]),              # Germany
            ("LOC", [(1, 0, 1)]),              # Vienna
        ],
        [
            {"h": 0, "t": 1, "r": "P205", "evidence": [0]},
            {"h": 0, "t": 2, "r": "P205", "evidence": [0]},
            {"h": 3, "t": 1, "r": "P17", "evidence": [1]},
        ],
    ),
    _record(
        "Oslo",
        [_sent("Oslo is the capital of Norway .")],
        [
            ("LOC", [(0, 0, 1)]),   # Oslo
            ("LOC", [(0, 5, 6)]),   # Norway
        ],
        [{"h": 0, "t": 1, "r": "P17", "evidence": [0]}],
    ),
    _record(
        "Snowfall",
        [_sent("Snow fell over Oslo in January .")],
        [
            ("LOC", [(0, 3, 4)]),    # Oslo
            ("TIME", [(0, 5, 6)]),   # January
        ],
        [],
    ),
    _record(
        "Amazon River",
        [
            _sent("The Amazon River flows through Brazil , Peru and Colombia ."),
            _sent("Manaus and Iquitos are cities on the Amazon River ."),
            _sent("Manaus is in Brazil and Iquitos is in Peru ."),
        ],
        [
            ("LOC", [(0, 1, 3), (1, 7, 9)]),   # Amazon River
            ("LOC", [(0, 5, 6), (2, 3, 4)]),   # Brazil
            ("LOC", [(0, 7, 8), (2, 8, 9)]),   # Peru
            ("LOC", [(0, 9, 10)]),             # Colombia
            ("LOC", [(1, 0, 1), (2, 0, 1)]),   # Manaus
            ("LOC", [(1, 2, 3), (2, 5, 6)]),   # Iquitos
        ],
        [
            {"h": 4, "t": 1, "r": "P17", "evidence": [2]},
            {"h": 5, "t": 2, "r": "P17", "evidence": [2]},
            {"h": 0, "t": 1, "r": "P205", "evidence": [0]},
            {"h": 0, "t": 2, "r": "P205", "evidence": [0]},
            {"h": 0, "t": 3, "r": "P205", "evidence": [0]},
        ],
    ),
]

# (doc_id, rid) -> decomposed generation; anything absent answers the
# no-pair sentinel. test-00004's country response deliberately mixes
# accepted lines with one repetition, one unresolvable surface, and two
# malformed lines, plus prose.
DECOMPOSED_SCRIPT = {
    ("test-00001", "P17"): (
        "(**Vienna**, 'country', **Austria**) | Because Vienna is the capital"
        " of Austria."
    ),
    ("test-00002", "P17"): (
        "(**Oslo**, 'country', **Norway**) | Because Oslo is the capital of"
        " Norway."
    ),
    ("test-00004", "P17"): "\n".join(
        [
            "(**Manaus**, 'country', **Brazil**) | Because Manaus is a city in Brazil.",
            "(**Iquitos**, 'country', **Peru**) | Because Iquitos is a city in Peru.",
            "(**Manaus**, 'country', **Brazil**) | Because Manaus is in Brazil.",
            "(**Atlantis**, 'country', **Brazil**) | Because Atlantis sank long ago.",
            "(**Colombia**, 'country'",
            "(**Colombia**, 'located in', **Brazil**) | Because the label is off-prompt.",
            "The remaining pairs are unclear from the context.",
            "(**Amazon River**, 'country', **Brazil**) | Because the Amazon flows in Brazil.",
            "(**Amazon River**, 'country', **Peru**) | Because the Amazon flows in Peru.",
            "(**Amazon River**, 'country', **Colombia**) | Because the Amazon flows in Colombia.",
        ]
    ),
}

# ensemble answers forced to NA even though the pair is gold (leaves the
# pair missing after the fill-in stage)
ENSEMBLE_NA = {("test-00001", "Danube", "Germany")}

NEGATIVE = "Cannot find a pair."


class ScriptedBackend:
    """Answers pipeline prompts from the tables above.

    Prompts are identified purely from their text: the prompted relation
    name, and the target document via its marked context (the last context
    block in the prompt).
    """

    backend_id = "scripted"

    def __init__(self, docs, registry):
        self._registry = registry
        self._by_context = {marked_context(d): d for d in docs}

    def generate(self, req):
        return GenerationResponse(
            text=self._respond(req.prompt_text), model=req.model, usage={}
        )

    def _target_doc(self, prompt: str, marker: str):
        tail = prompt.rsplit(marker, 1)[1]
        for ctx, doc in self._by_context.items():
            if tail.startswith(ctx):
                return doc
        raise AssertionError("prompt target matches no fixture document")

    def _respond(self, prompt: str) -> str:
        if prompt.startswith("Based on the context"):
            name = re.search(r"assign the relation “(.+?)”", prompt).group(1)
            rel = self._registry.by_name(name)
            doc = self._target_doc(prompt, "[context]:")
            return DECOMPOSED_SCRIPT.get((doc.doc_id, rel.rid), NEGATIVE)
        m = re.search(r"\(\*\*(.+?)\*\*, \[MASK\], \*\*(.+?)\*\*\)", prompt)
        head_s, tail_s = m.group(1), m.group(2)
        doc = self._target_doc(prompt, "[Context]: ")
        return self._answer(doc, head_s, tail_s)

    def _answer(self, doc, head_s: str, tail_s: str) -> str:
        no_rel = (
            f"(**{head_s}**, 'NA', **{tail_s}**) | Because the context does"
            " not state a relation between them."
        )
        if (doc.doc_id, head_s, tail_s) in ENSEMBLE_NA:
            return no_rel
        h = resolve_entity(doc, head_s)
        t = resolve_entity(doc, tail_s)
        for g in doc.gold:
            if g.head == h and g.tail == t:
                name = self._registry.get(g.rid).name
                return (
                    f"(**{head_s}**, '{name}', **{tail_s}**) | Because the"
                    " context supports this relation for the pair."
                )
        return no_rel


def _base_config(e2e_dir: Path, out_dir: Path, **overrides) -> RunConfig:
    fields = {
        "corpus_test": str(e2e_dir / "test.json"),
        "corpus_train": str(e2e_dir / "train.json"),
        "registry": str(e2e_dir / "registry.json"),
        "pool": str(e2e_dir / "pool.json"),
        "backend_kind": "replay",
        "replay": str(e2e_dir / "replay.jsonl"),
        "model": "e2e-model",
        "shots": 2,
        "seed": 7,
        "stage": "full",
        "concurrency": 1,
        "out_dir": str(out_dir),
    }
    fields.update(overrides)
    return RunConfig(**fields)


def write_e2e(e2e_dir: Path) -> None:
    e2e_dir.mkdir(parents=True, exist_ok=True)
    for name, payload in (
        ("train.json", TRAIN_DOCS),
        ("test.json", TEST_DOCS),
        ("registry.json", E2E_REGISTRY),
    ):
        with open(e2e_dir / name, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")

    from graphdpep.icl import build_pool
    from graphdpep.llm import HashMockEmbedder

    train_docs = load_split(e2e_dir / "train.json", "train")
    pool = build_pool(train_docs, HashMockEmbedder(), seed=7)
    pool.save(e2e_dir / "pool.json")

    registry = load_registry(e2e_dir / "registry.json")
    test_docs = load_split(e2e_dir / "test.json", "test")
    scripted = ScriptedBackend(test_docs, registry)

    with tempfile.TemporaryDirectory() as tmp:
        gen_cfg = _base_config(e2e_dir, Path(tmp) / "gen")
        with mock.patch.object(pipeline_mod, "_make_backend", lambda cfg: scripted):
            artifacts = run_pipeline(gen_cfg)
        assert artifacts.n_failed == 0, artifacts.failures
        rows = []
        with open(Path(tmp) / "gen" / "generations" / "cache.jsonl", encoding="utf-8") as fh:
            for line in fh:
                row = json.loads(line)
                rows.append(
                    {
                        "key": row["key"],
                        "model": row["model"],
                        "response_text": row["response_text"],
                        "usage": {},
                        "created_unix": 0,
                    }
                )
        rows.sort(key=lambda r: r["key"])
        with open(e2e_dir / "replay.jsonl", "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")

    config_row = asdict(_base_config(e2e_dir, Path("run")))
    # the checked-in config keeps fixture-relative paths; consumers resolve them
    for key in ("corpus_test", "corpus_train", "registry", "pool", "replay"):
        config_row[key] = Path(config_row[key]).name
    config_row["out_dir"] = "run"
    with open(e2e_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config_row, fh, indent=2, sort_keys=True)
        fh.write("\n")

    _verify(e2e_dir)


def _verify(e2e_dir: Path) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        runs = {}
        for name, overrides in (
            ("full_a", {}),
            ("full_b", {}),
            ("full_p8", {"concurrency": 8}),
            ("decomposed", {"stage": "decomposed"}),
        ):
            art = run_pipeline(_base_config(e2e_dir, tmp / name, **overrides))
            assert art.n_failed == 0, (name, art.failures)
            runs[name] = art

        trip_a = (tmp / "full_a" / "triplets.jsonl").read_bytes()
        trip_b = (tmp / "full_b" / "triplets.jsonl").read_bytes()
        trip_p8 = (tmp / "full_p8" / "triplets.jsonl").read_bytes()
        assert trip_a == trip_b, "replay runs not byte-identical"
        assert trip_a == trip_p8, "concurrency changes triplets.jsonl"
        met_a = (tmp / "full_a" / "metrics.json").read_bytes()
        met_b = (tmp / "full_b" / "metrics.json").read_bytes()
        met_p8 = (tmp / "full_p8" / "metrics.json").read_bytes()
        assert met_a == met_b == met_p8, "metrics.json not deterministic"

        full = json.loads(met_a)
        dec = json.loads((tmp / "decomposed" / "metrics.json").read_bytes())
        assert full["micro"]["recall"] > dec["micro"]["recall"], (
            full["micro"], dec["micro"],
        )
        print(
            "e2e verified: micro recall %.3f (decomposed) -> %.3f (full),"
            " missing_rate %.3f -> %.3f"
            % (
                dec["micro"]["recall"],
                full["micro"]["recall"],
                dec["missing_rate"],
                full["missing_rate"],
            )
        )


if __name__ == "__main__":
    import sys

    sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))
    write_e2e(Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "e2e")
