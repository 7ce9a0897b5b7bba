"""
Tests for descriptor statistics
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from exceptions import PreconditionError
from feature_stats import (FeatureLevelStats, build_descriptor, channel_stats, describe,
                           descriptor_from_feature_maps, descriptor_set_from_matrix)


def test_constant_map_has_zero_std():
    stats = channel_stats(np.full((1, 3, 4), 5.0))
    assert_allclose(stats.mean_vec, [5.0])
    assert_allclose(stats.std_vec, [0.0])


def test_population_std():
    stats = channel_stats(np.array([[[0.0, 2.0]]]))
    assert_allclose(stats.mean_vec, [1.0])
    assert_allclose(stats.std_vec, [1.0])


def test_duplicated_channel_has_equal_stats():
    rng = np.random.default_rng(0)
    channel = rng.normal(size=(1, 5, 6))
    stats = channel_stats(np.concatenate([channel, channel]))
    assert stats.mean_vec[0] == stats.mean_vec[1]
    assert stats.std_vec[0] == stats.std_vec[1]


def test_empty_map_rejected():
    with pytest.raises(PreconditionError, match="empty feature map"):
        channel_stats(np.zeros((2, 0, 3)))


def test_non_finite_map_rejected():
    fmap = np.ones((1, 2, 2))
    fmap[0, 1, 1] = np.nan
    with pytest.raises(PreconditionError, match="non-finite activations"):
        channel_stats(fmap)


def test_single_level_descriptor():
    stats = FeatureLevelStats(1, np.array([1.0]), np.array([2.0]))
    assert_array_equal(build_descriptor([stats], "a").z, [1.0, 2.0])


def test_levels_are_concatenated_in_level_order():
    level2 = FeatureLevelStats(2, np.array([3.0]), np.array([4.0]))
    level1 = FeatureLevelStats(1, np.array([1.0]), np.array([2.0]))
    assert_array_equal(build_descriptor([level2, level1], "a").z, [1.0, 2.0, 3.0, 4.0])


def test_descriptor_dimension_is_twice_total_channels():
    rng = np.random.default_rng(1)
    maps = [rng.random((c, 2, 3)) for c in (64, 128, 256)]
    desc = descriptor_from_feature_maps(maps, "img_0001", gt_count=12.0)
    assert desc.z.shape == (896,)
    assert desc.gt_count == 12.0


def test_duplicate_levels_rejected():
    stats = FeatureLevelStats(1, np.array([1.0]), np.array([1.0]))
    with pytest.raises(PreconditionError) as info:
        build_descriptor([stats, stats], "a")
    assert info.value.code == "duplicate_level"


def test_negative_std_rejected():
    with pytest.raises(PreconditionError):
        FeatureLevelStats(1, np.array([0.0]), np.array([-1.0]))


def test_descriptor_set_from_matrix_defaults():
    Z = np.arange(6, dtype=float).reshape(3, 2)
    dset = descriptor_set_from_matrix(Z)
    assert dset.sample_ids == ["s000000", "s000001", "s000002"]
    assert dset.N == 3 and dset.D == 2
    assert not dset.has_count and dset.gt_counts is None
    assert_array_equal(dset.matrix, Z)


def test_descriptor_set_rejects_duplicate_ids():
    with pytest.raises(PreconditionError, match="duplicate sample id"):
        descriptor_set_from_matrix(np.zeros((2, 2)), sample_ids=["a", "a"])


def test_descriptor_set_rejects_length_mismatch():
    with pytest.raises(PreconditionError) as info:
        descriptor_set_from_matrix(np.zeros((2, 2)), gt_counts=[1.0])
    assert info.value.code == "length_mismatch"


def test_subset_keeps_order():
    dset = descriptor_set_from_matrix(np.arange(8, dtype=float).reshape(4, 2), gt_counts=[1, 2, 3, 4])
    sub = dset.subset([2, 0])
    assert sub.sample_ids == ["s000002", "s000000"]
    assert_array_equal(sub.gt_counts, [3.0, 1.0])


def test_describe_reports_counts_and_domains():
    dset = descriptor_set_from_matrix(np.zeros((4, 3)), gt_counts=[1, 2, 3, 4], true_domains=[0, 0, 1, 1])
    info = describe(dset)
    assert info['N'] == 4 and info['D'] == 3
    assert info['count_quantiles'][0.5] == pytest.approx(2.5)
    assert info['domain_sizes'] == {0: 2, 1: 2}
