"""Outlier scoring, pruning, and missing-pair detection."""

from __future__ import annotations

import json
import random

import numpy as np
import pytest

from conftest import PlantedEmbedder
from graphdpep.corpus import QueryPair
from graphdpep.errors import TooFewPoints
from graphdpep.extract import STAGE_DECOMPOSED, Triplet
from graphdpep.verifier import (
    detect_missing,
    detect_outliers,
    lof_scores,
    rates,
    verify,
)
from oracles import brute_lof, grid_points


def _triplet(i, rid="P17", expl=None, head=0, tail=1):
    return Triplet(
        head_surface=f"h{i}",
        tail_surface=f"t{i}",
        head_idx=head,
        tail_idx=tail,
        rid=rid,
        explanation=expl if expl is not None else f"e{i}",
        stage=STAGE_DECOMPOSED,
    )


# ---------------------------------------------------------------------------
# lof scores
# ---------------------------------------------------------------------------

def test_square_corners_all_score_one():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    for k in (1, 2, 3):
        scores = lof_scores(pts, k=k)
        assert np.max(np.abs(scores - 1.0)) < 1e-9


def test_far_point_has_strict_maximum_score():
    pts = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0], [5.0, 5.0]])
    scores = lof_scores(pts, k=2)
    want = brute_lof(pts, 2)
    assert np.max(np.abs(scores - np.array(want))) < 1e-9
    assert np.argmax(scores) == 4
    assert scores[4] > max(scores[:4]) + 0.5


def test_matches_brute_force_on_seeded_sets():
    rng = random.Random(2024)
    for _ in range(25):
        n = rng.randint(2, 40)
        dim = rng.randint(1, 6)
        k = rng.choice([1, 3, 5, 10])
        pts = grid_points(rng, n, dim)
        got = lof_scores(np.array(pts), k=k)
        want = brute_lof(pts, k)
        assert np.max(np.abs(got - np.array(want))) < 1e-9, (n, dim, k)


def test_too_few_points():
    with pytest.raises(TooFewPoints):
        lof_scores(np.array([[1.0, 2.0]]), k=5)
    with pytest.raises(TooFewPoints):
        lof_scores(np.zeros((0, 2)), k=5)


def test_k_clamped_to_n_minus_one():
    pts = np.array([[0.0], [1.0], [3.0]])
    assert np.array_equal(lof_scores(pts, k=10), lof_scores(pts, k=2))


def test_duplicate_points_stay_finite():
    pts = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [2.0, 2.0]])
    scores = lof_scores(pts, k=2)
    assert np.all(np.isfinite(scores))
    want = brute_lof(pts, 2)
    assert np.max(np.abs(scores - np.array(want))) < 1e-9


def test_scores_follow_point_permutation():
    rng = random.Random(7)
    pts = grid_points(rng, 12, 3)
    # drop accidental duplicates so all distances are distinct enough
    pts = list(dict.fromkeys(pts))
    base = lof_scores(np.array(pts), k=3)
    perm = list(range(len(pts)))
    rng.shuffle(perm)
    shuffled = lof_scores(np.array([pts[i] for i in perm]), k=3)
    assert np.max(np.abs(shuffled - base[perm])) < 1e-9


# ---------------------------------------------------------------------------
# outlier pruning
# ---------------------------------------------------------------------------

def _planted_embedder(n_cluster, far_points):
    table = {}
    rng = random.Random(5)
    for i in range(n_cluster):
        table[f"e{i}"] = (rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01))
    for j, vec in enumerate(far_points):
        table[f"far{j}"] = vec
    return PlantedEmbedder(table)


def test_small_groups_kept_wholesale():
    embedder = PlantedEmbedder({})
    triplets = [_triplet(i) for i in range(3)]
    kept, outliers, scores = detect_outliers(triplets, embedder)
    assert kept == triplets
    assert outliers == []
    assert scores == {}


def test_planted_far_explanation_flagged():
    embedder = _planted_embedder(9, [(5.0, 5.0)])
    triplets = [_triplet(i) for i in range(9)] + [_triplet(9, expl="far0")]
    kept, outliers, scores = detect_outliers(triplets, embedder)
    assert len(outliers) == 1
    assert outliers[0].triplet.explanation == "far0"
    assert outliers[0].score > 1.5
    assert len(kept) == 9
    assert len(scores["P17"]) == 10


def test_cap_keeps_only_the_highest_scores():
    embedder = _planted_embedder(8, [(5.0, 5.0), (50.0, 50.0)])
    triplets = [_triplet(i) for i in range(8)]
    triplets += [_triplet(8, expl="far0"), _triplet(9, expl="far1")]
    kept, outliers, _ = detect_outliers(triplets, embedder)
    # ceil(0.1 * 10) = 1 slot: the farther point wins it
    assert len(outliers) == 1
    assert outliers[0].triplet.explanation == "far1"
    assert any(t.explanation == "far0" for t in kept)


def test_no_outliers_when_everything_below_threshold():
    embedder = _planted_embedder(10, [])
    triplets = [_triplet(i) for i in range(10)]
    kept, outliers, _ = detect_outliers(triplets, embedder, tau=1.5)
    assert outliers == []
    assert kept == triplets


def test_raised_threshold_suppresses_flagging():
    embedder = _planted_embedder(9, [(5.0, 5.0)])
    triplets = [_triplet(i) for i in range(9)] + [_triplet(9, expl="far0")]
    _, outliers, _ = detect_outliers(triplets, embedder, tau=10_000.0)
    assert outliers == []


def test_groups_scored_independently_by_relation():
    embedder = _planted_embedder(9, [(5.0, 5.0)])
    big = [_triplet(i) for i in range(9)] + [_triplet(9, expl="far0")]
    small = [_triplet(100 + i, rid="P19", expl="far0") for i in range(2)]
    kept, outliers, scores = detect_outliers(big + small, embedder)
    assert [o.triplet.rid for o in outliers] == ["P17"]
    assert set(scores) == {"P17"}
    assert all(t in kept for t in small)


# ---------------------------------------------------------------------------
# missing pairs and rates
# ---------------------------------------------------------------------------

def test_missing_pairs_in_query_order():
    q = [QueryPair(0, 1), QueryPair(2, 3), QueryPair(4, 5)]
    kept = [_triplet(0, head=2, tail=3)]
    assert detect_missing(kept, q) == [QueryPair(0, 1), QueryPair(4, 5)]


def test_missing_is_orientation_strict():
    q = [QueryPair(0, 1)]
    kept = [_triplet(0, head=1, tail=0)]  # reversed coverage does not count
    assert detect_missing(kept, q) == [QueryPair(0, 1)]


def test_missing_with_empty_kept_is_all_of_q():
    q = [QueryPair(0, 1), QueryPair(2, 3)]
    assert detect_missing([], q) == q
    assert detect_missing([], []) == []


def test_full_coverage_leaves_nothing_missing():
    q = [QueryPair(0, 1), QueryPair(2, 3)]
    kept = [_triplet(0, head=0, tail=1), _triplet(1, head=2, tail=3)]
    assert detect_missing(kept, q) == []


def test_rates_and_zero_guards():
    assert rates(2, 0, 10, 5) == (0.2, 0.0)
    assert rates(0, 3, 0, 6) == (0.0, 0.5)
    assert rates(0, 0, 0, 0) == (0.0, 0.0)


# ---------------------------------------------------------------------------
# full report
# ---------------------------------------------------------------------------

def test_verify_assembles_report():
    embedder = _planted_embedder(9, [(5.0, 5.0)])
    accepted = [_triplet(i, head=0, tail=1) for i in range(9)]
    accepted.append(_triplet(9, expl="far0", head=2, tail=3))
    q = [QueryPair(0, 1), QueryPair(2, 3), QueryPair(4, 5)]
    report = verify("doc-1", accepted, q, embedder, defect_counts={"incomplete": 2})

    assert report.doc_id == "doc-1"
    assert report.accepted_count == 10
    assert len(report.kept) == 9
    assert len(report.outliers) == 1
    # dropping the outlier uncovers its pair again
    assert report.missing == [QueryPair(2, 3), QueryPair(4, 5)]
    assert report.outlier_rate == pytest.approx(0.1)
    assert report.missing_rate == pytest.approx(2 / 3)
    assert report.defect_counts == {"incomplete": 2}

    blob = json.dumps(report.to_dict(), sort_keys=True)
    round_tripped = json.loads(blob)
    assert round_tripped["accepted_count"] == 10
    assert len(round_tripped["kept"]) == 9


def test_verify_empty_input():
    report = verify("doc-2", [], [QueryPair(0, 1)], PlantedEmbedder({}))
    assert report.kept == []
    assert report.missing == [QueryPair(0, 1)]
    assert report.outlier_rate == 0.0
    assert report.missing_rate == 1.0
