"""
Tests for stratification, ARI, churn and the baseline partitions
"""

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from domain_discovery import DomainSource, PseudoDomainAssignment, align_labels
from evaluation import (adjusted_rand_index, count_stratification, evaluate_assignment,
                        flat_kmeans_partition, label_churn, lower_median, random_partition)
from exceptions import PreconditionError
from synthetic import generate_mixture, well_separated_spec


def _epoch(labels, K, epoch, permutation=None):
    return PseudoDomainAssignment(labels=np.asarray(labels), K=K, epoch=epoch,
                                  source=DomainSource.GB_REPRESENTATIVE,
                                  permutation_applied=None if permutation is None else np.asarray(permutation))


def test_lower_median():
    assert lower_median([1, 2, 3, 4]) == 2
    assert lower_median([5, 1, 3]) == 3


def test_stratification_example():
    labels = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])
    counts = np.array([5, 10, 15, 40, 50, 60, 90, 100, 110], dtype=float)
    report = count_stratification(labels, counts, 3)
    assert report.medians.tolist() == [10.0, 50.0, 100.0]
    assert report.delta_med == pytest.approx(90.0)
    assert report.sigma_med == pytest.approx(36.82, abs=0.01)


def test_single_domain_has_no_spread():
    report = count_stratification(np.zeros(5), np.arange(5, dtype=float), 1)
    assert report.delta_med == 0.0 and report.sigma_med == 0.0


def test_stratification_ignores_label_names():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 4, 100)
    labels[:4] = np.arange(4)
    counts = rng.lognormal(4, 1, 100)
    renamed = np.array([2, 0, 3, 1])[labels]
    first, second = count_stratification(labels, counts, 4), count_stratification(renamed, counts, 4)
    assert first.delta_med == second.delta_med
    assert first.sigma_med == pytest.approx(second.sigma_med)


def test_empty_domain_rejected():
    with pytest.raises(PreconditionError, match=r"empty pseudo-domains: \[1\]"):
        count_stratification(np.array([0, 0, 2]), np.ones(3), 3)


def test_ari_examples():
    a = np.array([0, 0, 1, 1, 2, 2])
    assert adjusted_rand_index(a, a) == pytest.approx(1.0)
    assert adjusted_rand_index(a, np.array([5, 5, 3, 3, 9, 9])) == pytest.approx(1.0)
    assert adjusted_rand_index(np.zeros(4, dtype=int), np.array([0, 0, 1, 1])) == pytest.approx(0.0)
    rng = np.random.default_rng(1)
    x, y = rng.integers(0, 3, 50), rng.integers(0, 4, 50)
    assert adjusted_rand_index(x, y) == pytest.approx(adjusted_rand_index(y, x))


def test_churn_of_identical_epochs():
    labels = [0, 1, 2, 0, 1, 2]
    assert label_churn([_epoch(labels, 3, 0), _epoch(labels, 3, 1, [0, 1, 2])]) == 0.0


def test_churn_counts_changed_samples():
    first = np.zeros(10, dtype=int)
    first[5:] = 1
    second = first.copy()
    second[0] = 1
    assert label_churn([_epoch(first, 2, 0), _epoch(second, 2, 1, [0, 1])]) == pytest.approx(0.1)


def test_churn_after_alignment_ignores_renaming():
    previous = _epoch([0, 0, 1, 1, 2, 2], 3, 0)
    renamed = align_labels(_epoch([2, 2, 0, 0, 1, 1], 3, 1), previous)
    assert label_churn([previous, renamed]) == 0.0


def test_churn_requires_alignment():
    with pytest.raises(PreconditionError, match="unaligned inputs"):
        label_churn([_epoch([0, 1], 2, 0), _epoch([1, 0], 2, 1)])
    with pytest.raises(PreconditionError):
        label_churn([_epoch([0, 1], 2, 0)])


def test_random_partition_sizes():
    assignment = random_partition(10, 3, rng_seed=4)
    assert sorted(np.bincount(assignment.labels).tolist()) == [3, 3, 4]
    assert assignment.source == DomainSource.RANDOM_BASELINE
    assert_array_equal(random_partition(10, 3, rng_seed=4).labels, assignment.labels)
    with pytest.raises(PreconditionError, match="insufficient points"):
        random_partition(2, 3)


def test_flat_kmeans_recovers_separated_domains():
    dset = generate_mixture(well_separated_spec(K=3, dim=6, n_total=150, seed=2))
    assignment = flat_kmeans_partition(dset, 3)
    assert assignment.source == DomainSource.FLAT_KMEANS_BASELINE
    assert adjusted_rand_index(assignment.labels, dset.true_domains) >= 0.95
    assert_array_equal(flat_kmeans_partition(dset, 1).labels, np.zeros(dset.N))


def test_evaluate_assignment_masks_outliers():
    truth = np.array([0, 0, 1, 1, -1, -1])
    assignment = _epoch([0, 0, 1, 1, 0, 1], 2, 0)
    summary = evaluate_assignment(assignment, gt_counts=np.arange(6, dtype=float), true_domains=truth)
    assert summary['ari'] == pytest.approx(1.0)
    assert summary['group_sizes'] == [3, 3]
    assert summary['stratification']['delta_med'] == pytest.approx(2.0)
    unmasked = evaluate_assignment(assignment, true_domains=truth, mask_outliers=False)
    assert unmasked['ari'] < 1.0


def test_evaluate_assignment_reports_empty_domains():
    summary = evaluate_assignment(_epoch([0, 0, 2], 3, 0), gt_counts=np.ones(3))
    assert summary['empty_domains'] == [1]
    assert summary['stratification'] is None
