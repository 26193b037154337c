"""Evaluation: set-based PRF, uniqueness, topical similarity, judge scores.

Predictions and gold are compared as exact (doc, head, relation, tail) keys.
NA never counts on either side. Division guards follow one convention:
an empty-vs-empty comparison is perfect, a missing denominator scores zero.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .corpus import Document
from .extract import Triplet
from .relmeta import NA_RID, RelationRegistry, linearize

_FLOAT_RE = re.compile(r"[-+]?\d*\.?\d+(?:[eE][-+]?\d+)?")

FS_TEMPLATE = (
    "Context: {context}\n"
    "Statement: {statement}\n"
    "On a scale from 0 to 1, how faithfully is the statement supported by the"
    " context? Reply with a single number.\n"
    "Score:"
)
GS_TEMPLATE = (
    "Statement: {statement}\n"
    "Can this relation statement be split into finer-grained relation"
    " statements? Reply with a single number from 0 to 1, where 1 means the"
    " statement is already atomic.\n"
    "Score:"
)
CS_TEMPLATE = (
    "Context: {context}\n"
    "Statements:\n{statements}\n"
    "On a scale from 0 to 1, how completely do the statements cover the"
    " relational facts stated in the context? Reply with a single number.\n"
    "Score:"
)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    pred_count: int
    gold_count: int

    @classmethod
    def from_counts(cls, tp: int, pred_count: int, gold_count: int) -> "PRF":
        if pred_count == 0 and gold_count == 0:
            return cls(1.0, 1.0, 1.0, 0, 0, 0)
        p = tp / pred_count if pred_count else 0.0
        r = tp / gold_count if gold_count else 0.0
        f1 = 2 * p * r / (p + r) if (p + r) else 0.0
        return cls(p, r, f1, tp, pred_count, gold_count)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "pred_count": self.pred_count,
            "gold_count": self.gold_count,
        }


def _drop_na(keys: set) -> set:
    return {k for k in keys if k[-2] != NA_RID}


def micro_prf(pred: set, gold: set) -> PRF:
    """Keys are (doc_id, head, rid, tail) tuples; NA keys are ignored."""
    pred = _drop_na(set(pred))
    gold = _drop_na(set(gold))
    return PRF.from_counts(len(pred & gold), len(pred), len(gold))


def macro_prf(pred: set, gold: set) -> tuple[PRF, dict[str, PRF]]:
    """Unweighted mean over relation types that appear in gold.

    Predicted-only types are excluded from the macro average (they still hurt
    micro precision); a gold type with no predictions scores zero precision.
    """
    pred = _drop_na(set(pred))
    gold = _drop_na(set(gold))
    gold_rids = sorted({k[-2] for k in gold})
    per_type: dict[str, PRF] = {}
    for rid in gold_rids:
        pred_t = {k for k in pred if k[-2] == rid}
        gold_t = {k for k in gold if k[-2] == rid}
        per_type[rid] = PRF.from_counts(len(pred_t & gold_t), len(pred_t), len(gold_t))
    if not per_type:
        agg = PRF.from_counts(0, len(pred), 0)
        return agg, per_type
    mean_p = sum(x.precision for x in per_type.values()) / len(per_type)
    mean_r = sum(x.recall for x in per_type.values()) / len(per_type)
    mean_f = sum(x.f1 for x in per_type.values()) / len(per_type)
    agg = PRF(mean_p, mean_r, mean_f, sum(x.tp for x in per_type.values()), len(pred), len(gold))
    return agg, per_type


def prediction_keys(doc_id: str, triplets: Sequence[Triplet]) -> set:
    return {
        (doc_id, t.head_idx, t.rid, t.tail_idx)
        for t in triplets
        if t.rid != NA_RID and t.head_idx is not None and t.tail_idx is not None
    }


def gold_keys(doc: Document) -> set:
    return {(doc.doc_id, g.head, g.rid, g.tail) for g in doc.gold if g.rid != NA_RID}


def uniqueness(preds_by_doc: Mapping[str, Sequence[Triplet]], mode: str = "triplets") -> float:
    """Mean per-document share of distinct predictions (1.0 for no predictions)."""
    if mode not in ("triplets", "types"):
        raise ValueError(f"unknown uniqueness mode {mode!r}")
    if not preds_by_doc:
        return 1.0
    scores = []
    for _, preds in sorted(preds_by_doc.items()):
        items = [
            t.key if mode == "triplets" else t.rid for t in preds if t.rid != NA_RID
        ]
        scores.append(len(set(items)) / len(items) if items else 1.0)
    return float(sum(scores) / len(scores))


def _linearized_predictions(
    preds: Sequence[Triplet], registry: RelationRegistry
) -> list[str]:
    out = []
    for t in preds:
        if t.rid == NA_RID or t.rid not in registry:
            continue
        out.append(linearize(registry.get(t.rid), t.head_surface, t.tail_surface, 0))
    return out


def topical_similarity(
    docs: Sequence[Document],
    preds_by_doc: Mapping[str, Sequence[Triplet]],
    embedder,
    registry: RelationRegistry,
) -> float:
    """Mean cosine (clamped to [0, 1]) between each document and its
    linearized predictions; a document with no predictions scores 0."""
    if not docs:
        return 0.0
    scores = []
    for doc in docs:
        lines = _linearized_predictions(preds_by_doc.get(doc.doc_id, ()), registry)
        if not lines:
            scores.append(0.0)
            continue
        vecs = np.asarray(embedder.embed([doc.plain_text(), "\n".join(lines)]))
        a, b = vecs[0], vecs[1]
        denom = float(np.linalg.norm(a) * np.linalg.norm(b))
        cos = float(np.dot(a, b) / denom) if denom else 0.0
        scores.append(min(1.0, max(0.0, cos)))
    return float(sum(scores) / len(scores))


@dataclass
class JudgeScores:
    fs: float = 0.0
    gs: float = 0.0
    cs: float = 0.0
    items: int = 0
    unparseable: int = 0

    def to_dict(self) -> dict:
        return {
            "fs": self.fs,
            "gs": self.gs,
            "cs": self.cs,
            "items": self.items,
            "unparseable": self.unparseable,
        }


class ConstantJudge:
    """Deterministic mock judge for tests: always answers the same score."""

    def __init__(self, value: float = 0.7):
        self.value = value

    def __call__(self, prompt_text: str) -> str:
        return str(self.value)


JUDGE_TEMPERATURE = 0.0
JUDGE_MAX_NEW_TOKENS = 16


def backend_judge(backend, model: str) -> Callable[[str], str]:
    """Adapt a generation backend into a judge callable."""
    from .llm import GenerationRequest

    def _judge(prompt_text: str) -> str:
        req = GenerationRequest(
            model=model,
            prompt_text=prompt_text,
            temperature=JUDGE_TEMPERATURE,
            max_new_tokens=JUDGE_MAX_NEW_TOKENS,
        )
        return backend.generate(req).text

    return _judge


def _parse_score(text: str) -> Optional[float]:
    m = _FLOAT_RE.search(text)
    if m is None:
        return None
    return min(1.0, max(0.0, float(m.group(0))))


def judge_scores(
    doc: Document,
    preds: Sequence[Triplet],
    judge: Callable[[str], str],
    registry: RelationRegistry,
    templates: Optional[dict] = None,
) -> JudgeScores:
    """Faithfulness and granularity per triplet, coverage per document.

    Non-numeric judge responses are counted and skipped rather than raised.
    Zero predictions scores zero across the board.
    """
    templates = templates or {}
    fs_tpl = templates.get("fs", FS_TEMPLATE)
    gs_tpl = templates.get("gs", GS_TEMPLATE)
    cs_tpl = templates.get("cs", CS_TEMPLATE)
    lines = _linearized_predictions(preds, registry)
    if not lines:
        return JudgeScores()
    context = doc.plain_text()
    fs_vals, gs_vals = [], []
    unparseable = 0
    for statement in lines:
        fs = _parse_score(judge(fs_tpl.format(context=context, statement=statement)))
        if fs is None:
            unparseable += 1
        else:
            fs_vals.append(fs)
        gs = _parse_score(judge(gs_tpl.format(statement=statement)))
        if gs is None:
            unparseable += 1
        else:
            gs_vals.append(gs)
    cs = _parse_score(judge(cs_tpl.format(context=context, statements="\n".join(lines))))
    if cs is None:
        unparseable += 1
        cs_val = 0.0
    else:
        cs_val = cs
    return JudgeScores(
        fs=sum(fs_vals) / len(fs_vals) if fs_vals else 0.0,
        gs=sum(gs_vals) / len(gs_vals) if gs_vals else 0.0,
        cs=cs_val,
        items=len(lines),
        unparseable=unparseable,
    )


@dataclass
class MetricsReport:
    micro: PRF
    macro: PRF
    per_type: dict[str, PRF] = field(default_factory=dict)
    uniqueness: float = 0.0
    topical_similarity: float = 0.0
    judge: Optional[JudgeScores] = None
    outlier_rate: float = 0.0
    missing_rate: float = 0.0
    n_docs: int = 0
    n_pred: int = 0
    n_gold: int = 0

    def to_dict(self) -> dict:
        row = {
            "micro": self.micro.to_dict(),
            "macro": self.macro.to_dict(),
            "per_type": {rid: prf.to_dict() for rid, prf in sorted(self.per_type.items())},
            "uniqueness": self.uniqueness,
            "topical_similarity": self.topical_similarity,
            "judge": self.judge.to_dict() if self.judge else None,
            "outlier_rate": self.outlier_rate,
            "missing_rate": self.missing_rate,
            "n_docs": self.n_docs,
            "n_pred": self.n_pred,
            "n_gold": self.n_gold,
        }
        return row


def compute_report(
    docs: Sequence[Document],
    preds_by_doc: Mapping[str, Sequence[Triplet]],
    embedder,
    registry: RelationRegistry,
    judge: Optional[Callable[[str], str]] = None,
    outlier_rate: float = 0.0,
    missing_rate: float = 0.0,
    uniqueness_mode: str = "triplets",
) -> MetricsReport:
    pred_set: set = set()
    gold_set: set = set()
    for doc in docs:
        pred_set |= prediction_keys(doc.doc_id, preds_by_doc.get(doc.doc_id, ()))
        gold_set |= gold_keys(doc)
    micro = micro_prf(pred_set, gold_set)
    macro, per_type = macro_prf(pred_set, gold_set)
    us = uniqueness(preds_by_doc, mode=uniqueness_mode)
    ts = topical_similarity(docs, preds_by_doc, embedder, registry)
    judge_agg: Optional[JudgeScores] = None
    if judge is not None:
        parts = [judge_scores(doc, preds_by_doc.get(doc.doc_id, ()), judge, registry) for doc in docs]
        if parts:
            judge_agg = JudgeScores(
                fs=sum(p.fs for p in parts) / len(parts),
                gs=sum(p.gs for p in parts) / len(parts),
                cs=sum(p.cs for p in parts) / len(parts),
                items=sum(p.items for p in parts),
                unparseable=sum(p.unparseable for p in parts),
            )
        else:
            judge_agg = JudgeScores()
    return MetricsReport(
        micro=micro,
        macro=macro,
        per_type=per_type,
        uniqueness=us,
        topical_similarity=ts,
        judge=judge_agg,
        outlier_rate=outlier_rate,
        missing_rate=missing_rate,
        n_docs=len(docs),
        n_pred=micro.pred_count,
        n_gold=micro.gold_count,
    )


_COLUMNS = [
    ("micro P", lambda r: r["micro"]["precision"]),
    ("micro R", lambda r: r["micro"]["recall"]),
    ("micro F1", lambda r: r["micro"]["f1"]),
    ("macro F1", lambda r: r["macro"]["f1"]),
    ("TS", lambda r: r["topical_similarity"]),
    ("US", lambda r: r["uniqueness"]),
    ("FS", lambda r: (r.get("judge") or {}).get("fs")),
    ("GS", lambda r: (r.get("judge") or {}).get("gs")),
    ("CS", lambda r: (r.get("judge") or {}).get("cs")),
    ("outlier rate", lambda r: r["outlier_rate"]),
    ("missing rate", lambda r: r["missing_rate"]),
]


def render_markdown(rows: Sequence[tuple[str, dict]]) -> str:
    """Comparison table across runs, one row per run."""
    header = "| run | " + " | ".join(name for name, _ in _COLUMNS) + " |"
    rule = "|" + " --- |" * (1 + len(_COLUMNS))
    lines = [header, rule]
    for name, report in rows:
        cells = []
        for _, fn in _COLUMNS:
            val = fn(report)
            cells.append("-" if val is None else f"{val:.4f}")
        lines.append(f"| {name} | " + " | ".join(cells) + " |")
    return "\n".join(lines)
