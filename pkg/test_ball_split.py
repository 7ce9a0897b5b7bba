"""
Tests for the weighted 2-means split
"""

import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ball_split import (farthest_pair_seed, is_simplex, split_objective, uniform_weights,
                        update_weights, weighted_2means, weighted_distance)
from exceptions import PreconditionError


def test_weighted_distance():
    assert weighted_distance(np.zeros(2), np.zeros(2), np.array([0.5, 0.5])) == 0.0
    assert weighted_distance(np.array([3.0, 4.0]), np.zeros(2), np.array([1.0, 0.0])) == pytest.approx(3.0)
    assert weighted_distance(np.array([2.0, 2.0]), np.zeros(2), np.array([0.5, 0.5])) == pytest.approx(2.0)


def test_weighted_distance_shape_mismatch():
    with pytest.raises(PreconditionError) as info:
        weighted_distance(np.zeros(2), np.zeros(3), np.ones(2) / 2)
    assert info.value.code == "dimension_mismatch"


def test_seeds_on_a_line():
    seeds = farthest_pair_seed(np.array([[0.0], [10.0], [1.0]]), uniform_weights(1))
    assert {seeds.first, seeds.second} == {0, 1}
    assert not seeds.degenerate


def test_seeds_collinear_ties_go_to_lowest_index():
    seeds = farthest_pair_seed(np.array([[0.0], [1.0], [2.0]]), uniform_weights(1))
    assert (seeds.first, seeds.second) == (0, 2)


def test_identical_points_are_degenerate():
    assert farthest_pair_seed(np.ones((4, 2)), uniform_weights(2)).degenerate


def test_seed_needs_two_points():
    with pytest.raises(PreconditionError, match="unsplittable"):
        farthest_pair_seed(np.zeros((1, 2)), uniform_weights(2))


@pytest.mark.parametrize("scatters, expected", [
    ([1.0, 1.0], [0.5, 0.5]),
    ([1.0, 3.0], [0.75, 0.25]),
    ([0.0, 5.0], [0.0, 1.0]),
    ([0.0, 0.0, 0.0], [1 / 3, 1 / 3, 1 / 3]),
])
def test_update_weights_examples(scatters, expected):
    assert_allclose(update_weights(np.array(scatters)), expected, atol=1e-9)


def test_update_weights_matches_direct_formula():
    rng = np.random.default_rng(0)
    eps = 1e-12
    for _ in range(50):
        D = rng.random(6) * 10
        D[rng.random(6) < 0.2] = 0.0
        beta = 1.5 + rng.random() * 3
        w = update_weights(D, beta=beta, eps=eps)
        assert is_simplex(w)
        positive = [t for t in range(6) if D[t] > 0]
        for j in range(6):
            if not positive:
                expected = 1 / 6
            elif D[j] == 0:
                expected = 0.0
            else:
                expected = 1.0 / sum(((D[j] + eps) / (D[t] + eps)) ** (1 / (beta - 1)) for t in positive)
            assert w[j] == pytest.approx(expected, abs=1e-12)


def test_update_weights_rejects_beta_at_one():
    with pytest.raises(PreconditionError):
        update_weights(np.ones(2), beta=1.0)


def test_two_tight_pairs():
    result = weighted_2means(np.array([[0.0], [0.1], [10.0], [10.1]]))
    groups = {frozenset(result.left_indices.tolist()), frozenset(result.right_indices.tolist())}
    assert groups == {frozenset({0, 1}), frozenset({2, 3})}


def test_two_points_give_singletons():
    result = weighted_2means(np.array([[0.0, 1.0], [3.0, -2.0]]))
    assert len(result.left_indices) == 1 and len(result.right_indices) == 1
    assert result.objective == 0.0


def test_weight_favors_the_separating_dimension():
    rng = np.random.default_rng(1)
    x = np.concatenate([rng.normal(0.0, 0.1, 30), rng.normal(10.0, 0.1, 30)])
    y = rng.normal(0.0, 1.0, 60)
    result = weighted_2means(np.column_stack([x, y]))
    assert result.weight[0] > result.weight[1]
    assert is_simplex(result.weight)
    assert set(result.left_indices.tolist()) in (set(range(30)), set(range(30, 60)))


def test_zero_diameter_ball_is_unsplittable():
    with pytest.raises(PreconditionError) as info:
        weighted_2means(np.full((5, 3), 2.0))
    assert info.value.code == "unsplittable"


def test_objective_history_never_increases():
    rng = np.random.default_rng(2)
    for _ in range(30):
        points = rng.normal(size=(int(rng.integers(5, 60)), 3))
        result = weighted_2means(points)
        assert np.all(np.diff(result.objective_history) <= 1e-12)
        assert len(result.left_indices) > 0 and len(result.right_indices) > 0
        assert result.objective == pytest.approx(
            split_objective(points, result.labels, result.centroids, result.weight), rel=1e-9, abs=1e-12)


def test_input_order_does_not_change_the_split():
    rng = np.random.default_rng(7)
    offsets = np.array([[0.0, 0.0, 0.0, 0.0], [6.0, 1.0, 0.0, 0.0], [0.0, 5.0, 3.0, 0.0]])
    points = np.vstack([rng.normal(scale=0.7, size=(15, 4)) + c for c in offsets])
    reference = weighted_2means(points)
    groups = {frozenset(reference.left_indices.tolist()), frozenset(reference.right_indices.tolist())}
    for _ in range(10):
        order = rng.permutation(len(points))
        result = weighted_2means(points[order])
        permuted = {frozenset(order[result.left_indices].tolist()),
                    frozenset(order[result.right_indices].tolist())}
        assert permuted == groups
        assert result.objective == pytest.approx(reference.objective, rel=1e-9)
        assert_allclose(result.weight, reference.weight, rtol=1e-9)


def _best_partition_sse(values):
    n = len(values)
    best = np.inf
    # the first point stays on the left, which covers every unordered 2-partition
    for mask in itertools.product((0, 1), repeat=n - 1):
        labels = np.array((0,) + mask)
        if labels.all() or not labels.any():
            continue
        sse = sum(((values[labels == g] - values[labels == g].mean()) ** 2).sum() for g in (0, 1))
        best = min(best, sse)
    return best


def test_one_dimensional_split_is_optimal():
    rng = np.random.default_rng(3)
    for _ in range(100):
        values = rng.normal(size=int(rng.integers(3, 11))) * 5
        result = weighted_2means(values[:, None])
        assert result.objective == pytest.approx(_best_partition_sse(values), rel=1e-9, abs=1e-12)
