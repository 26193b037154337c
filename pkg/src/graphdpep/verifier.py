"""Self-calibration over parsed triplets.

Per relation-type group, explanation embeddings are scored with the classic
local outlier factor (k-distance neighborhoods with ties included, reach
distances, local reachability density); high-scoring triplets are dropped
under a per-group cap. Missing query pairs are computed orientation-strict
against what survived.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .corpus import QueryPair
from .errors import TooFewPoints
from .extract import Triplet

EPS_DISTANCE = 1e-12
DEFAULT_K = 5
DEFAULT_TAU = 1.5
DEFAULT_CAP_FRACTION = 0.10
MIN_GROUP_SIZE = 4


def lof_scores(points: np.ndarray, k: int = DEFAULT_K) -> np.ndarray:
    """Local outlier factor for every row of `points` (n, d).

    Euclidean distances floored at 1e-12 so duplicate points stay finite;
    the effective k is min(k, n - 1); neighborhoods include distance ties.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n < 2:
        raise TooFewPoints(f"need at least 2 points, got {n}")
    k_eff = min(int(k), n - 1)
    if k_eff < 1:
        raise TooFewPoints(f"k={k} unusable for n={n}")

    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    dist = np.maximum(dist, EPS_DISTANCE)
    np.fill_diagonal(dist, np.inf)  # a point is never its own neighbor

    sorted_dist = np.sort(dist, axis=1)
    k_dist = sorted_dist[:, k_eff - 1]
    # neighborhoods keep every point at distance <= k-distance (ties included)
    neighbor_mask = dist <= k_dist[:, None]

    reach = np.maximum(dist, k_dist[None, :])  # reach(p, o) = max(kdist(o), d(p, o))
    n_neighbors = neighbor_mask.sum(axis=1)
    lrd = n_neighbors / np.where(neighbor_mask, reach, 0.0).sum(axis=1)

    lof = (np.where(neighbor_mask, lrd[None, :], 0.0).sum(axis=1) / n_neighbors) / lrd
    return lof


@dataclass
class OutlierRecord:
    triplet: Triplet
    score: float

    def to_dict(self) -> dict:
        return {"triplet": self.triplet.to_dict(), "lof": self.score}


def detect_outliers(
    triplets: Sequence[Triplet],
    embedder,
    k: int = DEFAULT_K,
    tau: float = DEFAULT_TAU,
    cap_fraction: float = DEFAULT_CAP_FRACTION,
) -> tuple[list[Triplet], list[OutlierRecord], dict[str, list[float]]]:
    """Split triplets into (kept, outliers) by explanation-embedding LOF.

    Groups smaller than 4 are kept wholesale. Within a group at most
    ceil(cap_fraction * size) triplets with LOF > tau are flagged, highest
    score first, ties resolved by input order. Returns per-group scores too.
    """
    groups: dict[str, list[int]] = {}
    for i, t in enumerate(triplets):
        groups.setdefault(t.rid, []).append(i)

    flagged: dict[int, float] = {}
    scores_by_rid: dict[str, list[float]] = {}
    for rid, idxs in groups.items():
        if len(idxs) < MIN_GROUP_SIZE:
            continue
        vecs = embedder.embed([triplets[i].explanation for i in idxs])
        scores = lof_scores(np.asarray(vecs), k=k)
        scores_by_rid[rid] = [float(s) for s in scores]
        cap = math.ceil(cap_fraction * len(idxs))
        over = [(float(scores[j]), j) for j in range(len(idxs)) if scores[j] > tau]
        over.sort(key=lambda sj: (-sj[0], sj[1]))
        for score, j in over[:cap]:
            flagged[idxs[j]] = score

    kept = [t for i, t in enumerate(triplets) if i not in flagged]
    outliers = [OutlierRecord(triplets[i], flagged[i]) for i in sorted(flagged)]
    return kept, outliers, scores_by_rid


def detect_missing(kept: Sequence[Triplet], q: Sequence[QueryPair]) -> list[QueryPair]:
    """Query pairs not covered by any kept triplet, orientation-strict, in q order."""
    covered = {(t.head_idx, t.tail_idx) for t in kept}
    return [pair for pair in q if (pair.head, pair.tail) not in covered]


def rates(n_outliers: int, n_missing: int, accepted_count: int, n_query_pairs: int) -> tuple[float, float]:
    outlier_rate = n_outliers / accepted_count if accepted_count else 0.0
    missing_rate = n_missing / n_query_pairs if n_query_pairs else 0.0
    return outlier_rate, missing_rate


@dataclass
class VerifierReport:
    doc_id: str
    accepted_count: int
    kept: list[Triplet] = field(default_factory=list)
    outliers: list[OutlierRecord] = field(default_factory=list)
    missing: list[QueryPair] = field(default_factory=list)
    defect_counts: dict = field(default_factory=dict)
    lof_scores: dict = field(default_factory=dict)
    outlier_rate: float = 0.0
    missing_rate: float = 0.0

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "accepted_count": self.accepted_count,
            "kept": [t.to_dict() for t in self.kept],
            "outliers": [o.to_dict() for o in self.outliers],
            "missing": [{"head": p.head, "tail": p.tail} for p in self.missing],
            "defect_counts": self.defect_counts,
            "lof_scores": self.lof_scores,
            "outlier_rate": self.outlier_rate,
            "missing_rate": self.missing_rate,
        }


def verify(
    doc_id: str,
    accepted: Sequence[Triplet],
    q: Sequence[QueryPair],
    embedder,
    defect_counts: Optional[dict] = None,
    k: int = DEFAULT_K,
    tau: float = DEFAULT_TAU,
    cap_fraction: float = DEFAULT_CAP_FRACTION,
) -> VerifierReport:
    """Run the full calibration pass for one document."""
    kept, outliers, scores = detect_outliers(accepted, embedder, k=k, tau=tau, cap_fraction=cap_fraction)
    missing = detect_missing(kept, q)
    outlier_rate, missing_rate = rates(len(outliers), len(missing), len(accepted), len(q))
    return VerifierReport(
        doc_id=doc_id,
        accepted_count=len(accepted),
        kept=kept,
        outliers=outliers,
        missing=missing,
        defect_counts=dict(defect_counts or {}),
        lof_scores=scores,
        outlier_rate=outlier_rate,
        missing_rate=missing_rate,
    )
