import math

import numpy as np
import pandas as pd
import pytest

from metrics import (
    FramePair,
    aggregate,
    boundary,
    boundary_f,
    default_tolerance,
    evaluate_sequence,
    jaccard,
    jf_mean,
)
from utils.bootstrap import get_bootstrapped_mean_ci
from utils.errors import ContractError, DimensionError


def _square(top, left, size=10, shape=(32, 32)):
    mask = np.zeros(shape, dtype=np.uint8)
    mask[top:top + size, left:left + size] = 1
    return mask


def _brute_boundary(mask):
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ny, nx = y + dy, x + dx
                if not (0 <= ny < h and 0 <= nx < w) or not mask[ny, nx]:
                    out[y, x] = True
    return out


def _brute_f(predicted, truth, tolerance):
    b_p = np.argwhere(_brute_boundary(predicted))
    b_t = np.argwhere(_brute_boundary(truth))

    def fraction(source, target):
        hits = 0
        for point in source:
            nearest = min(math.dist(point, other) for other in target)
            hits += nearest <= tolerance
        return hits / len(source)

    precision, recall = fraction(b_p, b_t), fraction(b_t, b_p)
    return 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)


def test_jaccard_examples():
    square = _square(4, 4)
    assert jaccard(FramePair.of(square, square)) == 1.0
    assert jaccard(FramePair.of(square, _square(20, 20))) == 0.0
    assert jaccard(FramePair.of(square, _square(4, 9))) == pytest.approx(1 / 3)
    empty = np.zeros((8, 8))
    assert jaccard(FramePair.of(empty, empty)) == 1.0


def test_boundary_matches_four_neighbour_rule(rng):
    for _ in range(20):
        mask = rng.uniform(size=(12, 15)) > 0.4
        np.testing.assert_array_equal(boundary(mask), _brute_boundary(mask))


def test_square_boundary_is_its_outline():
    outline = boundary(_square(4, 4).astype(bool))
    assert outline.sum() == 36
    full = boundary(np.ones((5, 5), dtype=bool))
    assert full.sum() == 16


def test_boundary_f_examples():
    square = _square(4, 4)
    shifted = _square(4, 5)
    assert boundary_f(FramePair.of(square, square), 0) == 1.0
    assert boundary_f(FramePair.of(square, shifted), 2) == 1.0
    assert boundary_f(FramePair.of(square, shifted), 0) == pytest.approx(_brute_f(square, shifted, 0))
    assert boundary_f(FramePair.of(square, _square(4, 9)), 1) == pytest.approx(_brute_f(square, _square(4, 9), 1))
    empty = np.zeros((32, 32))
    assert boundary_f(FramePair.of(empty, empty), 1) == 1.0
    assert boundary_f(FramePair.of(square, empty), 1) == 0.0


def test_boundary_f_matches_brute_force_on_random_masks(rng):
    for tolerance in (0, 1, 2.5):
        predicted = (rng.uniform(size=(10, 10)) > 0.5).astype(np.uint8)
        truth = (rng.uniform(size=(10, 10)) > 0.5).astype(np.uint8)
        expected = _brute_f(predicted, truth, tolerance)
        assert boundary_f(FramePair.of(predicted, truth), tolerance) == pytest.approx(expected)


def test_measures_are_symmetric(rng):
    for _ in range(10):
        a = (rng.uniform(size=(16, 16)) > 0.5).astype(np.uint8)
        b = (rng.uniform(size=(16, 16)) > 0.5).astype(np.uint8)
        assert jaccard(FramePair.of(a, b)) == jaccard(FramePair.of(b, a))
        assert boundary_f(FramePair.of(a, b), 1) == pytest.approx(boundary_f(FramePair.of(b, a), 1))


def test_large_tolerance_scores_one():
    diagonal = math.hypot(32, 32)
    assert boundary_f(FramePair.of(_square(0, 0, 4), _square(25, 25, 6)), diagonal) == 1.0


def test_erosion_never_raises_jaccard():
    truth = _square(6, 6, size=16)
    scores = [jaccard(FramePair.of(_square(6 + k, 6 + k, size=16 - 2 * k), truth)) for k in range(4)]
    assert scores == sorted(scores, reverse=True)
    assert scores[0] == 1.0


def test_frame_pair_contracts():
    with pytest.raises(DimensionError):
        FramePair.of(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(ContractError):
        FramePair.of(np.full((4, 4), 0.5), np.zeros((4, 4)))
    with pytest.raises(ContractError):
        boundary_f(FramePair.of(np.zeros((4, 4)), np.zeros((4, 4))), -1)


def test_jf_mean():
    assert jf_mean(0.804, 0.865) == pytest.approx(0.8345)


def test_default_tolerance():
    assert default_tolerance(64, 64) == 1
    assert default_tolerance(480, 854) == 8


def test_aggregate_object_then_sequence_means():
    results = pd.DataFrame(
        [
            ["a", 1, 1, 0.2, 0.4],
            ["a", 2, 1, 0.8, 0.6],
            ["b", 1, 1, 1.0, 1.0],
            ["b", 1, 2, 0.0, 0.0],
        ],
        columns=["sequence", "object_id", "frame", "J", "F"],
    )
    report = aggregate(results)
    assert report.per_sequence.loc["a", "J"] == pytest.approx(0.5)
    assert report.per_sequence.loc["b", "J"] == pytest.approx(0.5)
    assert report.J == pytest.approx(0.5)
    assert report.F == pytest.approx(0.5)
    payload = report.to_dict()
    assert payload["per_sequence"]["a"]["per_object"]["2"] == {"J": pytest.approx(0.8), "F": pytest.approx(0.6)}
    assert payload["global"]["JF"] == pytest.approx(0.5)


def test_aggregate_rejects_empty_results():
    with pytest.raises(ContractError):
        aggregate(pd.DataFrame(columns=["sequence", "object_id", "frame", "J", "F"]))
    with pytest.raises(ContractError):
        aggregate(pd.DataFrame({"J": [1.0]}))


def test_evaluate_sequence_skips_the_annotated_frame():
    truth = {0: _square(4, 4), 1: _square(4, 4), 3: _square(6, 6)}
    predicted = [np.zeros((32, 32), dtype=np.uint8), _square(4, 4), np.zeros((32, 32)), _square(6, 6)]
    results = evaluate_sequence("seq", predicted, truth)
    assert results["frame"].tolist() == [1, 3]
    assert results["J"].tolist() == [1.0, 1.0]
    assert results["F"].tolist() == [1.0, 1.0]
    with pytest.raises(ContractError):
        evaluate_sequence("seq", predicted, {1: _square(4, 4)})
    with pytest.raises(DimensionError):
        evaluate_sequence("seq", [predicted[0], np.zeros((16, 16))], truth)


def test_bootstrapped_mean_ci():
    few = get_bootstrapped_mean_ci(np.array([0.5, 0.7, np.nan]))
    assert math.isnan(few["ci_left"]) and few["count"] == 2
    assert few["mean_val"] == pytest.approx(0.6)
    constant = get_bootstrapped_mean_ci(np.full(6, 0.25))
    assert constant["ci_left"] == constant["ci_right"] == 0.25
    spread = get_bootstrapped_mean_ci(np.linspace(0.0, 1.0, 20))
    assert spread["ci_left"] <= spread["mean_val"] <= spread["ci_right"]
    assert spread["count"] == 20
