"""
Tests for the PCA reducer
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from exceptions import PreconditionError
from pca_reducer import (default_pca_dim, load_pca_model, pca_fit, pca_inverse_transform,
                         pca_transform, save_pca_model)


def test_two_points_on_an_axis():
    model = pca_fit(np.array([[0.0, 0.0], [2.0, 0.0]]), d=1)
    assert_allclose(model.components, [[1.0, 0.0]])
    assert_allclose(model.explained_variance, [1.0])
    assert_allclose(pca_transform(model, [[0.0, 0.0], [2.0, 0.0]]), [[-1.0], [1.0]])


def test_identical_rows_have_zero_variance():
    model = pca_fit(np.ones((5, 3)), d=1)
    assert_allclose(model.explained_variance, [0.0])
    assert model.rank_deficient


def test_full_rank_reconstruction():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(10, 4))
    model = pca_fit(X, d=4)
    assert_allclose(pca_inverse_transform(model, pca_transform(model, X)), X, atol=1e-10)


def test_components_orthonormal_and_variance_sorted():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 6)) * np.array([5, 4, 3, 2, 1, 0.5])
    model = pca_fit(X, d=4)
    assert_allclose(model.components @ model.components.T, np.eye(4), atol=1e-10)
    assert np.all(np.diff(model.explained_variance) <= 1e-12)
    for row in model.components:
        assert row[np.argmax(np.abs(row))] >= 0


def test_explained_variance_is_rotation_invariant():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(40, 5)) * np.array([4.0, 3.0, 2.0, 1.0, 0.5]) + 2.0
    rotation, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    for d in (2, 5):
        plain = pca_fit(X, d=d)
        rotated = pca_fit(X @ rotation.T, d=d)
        assert_allclose(rotated.explained_variance, plain.explained_variance, atol=1e-6)


def test_projection_energy_bounded_by_total_variance():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 5)) * np.array([3.0, 2.0, 1.5, 1.0, 0.2])
    total = X.var(axis=0).sum()
    for d in range(1, 5):
        assert pca_fit(X, d=d).explained_variance.sum() <= total + 1e-10
    full = pca_fit(X, d=5)
    assert full.explained_variance.sum() == pytest.approx(total, rel=1e-10)
    assert full.total_variance == pytest.approx(total, rel=1e-10)


def test_projection_energy_reaches_total_at_the_rank():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(30, 2)) @ rng.normal(size=(2, 6))
    model = pca_fit(X, d=2)
    assert not model.rank_deficient
    assert model.explained_variance.sum() == pytest.approx(X.var(axis=0).sum(), rel=1e-9)


def test_mean_maps_to_origin():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(20, 5))
    model = pca_fit(X, d=3)
    assert_allclose(pca_transform(model, X.mean(axis=0)), np.zeros((1, 3)), atol=1e-12)


def test_clusters_separate_along_first_component():
    rng = np.random.default_rng(3)
    low = rng.normal(scale=0.1, size=(20, 3))
    high = rng.normal(scale=0.1, size=(20, 3)) + np.array([10.0, 0.0, 0.0])
    model = pca_fit(np.vstack([low, high]), d=1)
    assert pca_transform(model, low).max() < pca_transform(model, high).min()


@pytest.mark.parametrize("d", [0, 4])
def test_dimension_out_of_range(d):
    with pytest.raises(PreconditionError) as info:
        pca_fit(np.zeros((5, 3)), d=d)
    assert info.value.code == "pca_dim"


def test_single_sample_rejected():
    with pytest.raises(PreconditionError):
        pca_fit(np.zeros((1, 3)))


@pytest.mark.parametrize("N, D, expected", [(100, 64, 32), (5, 64, 4), (1, 3, 1), (100, 8, 8)])
def test_default_pca_dim(N, D, expected):
    assert default_pca_dim(N, D) == expected


def test_transform_rejects_wrong_width():
    model = pca_fit(np.random.default_rng(4).normal(size=(6, 3)), d=2)
    with pytest.raises(PreconditionError, match="expected 3 columns"):
        pca_transform(model, np.zeros((2, 4)))


def test_model_save_load(tmp_path):
    model = pca_fit(np.random.default_rng(5).normal(size=(8, 4)), d=2)
    path = tmp_path / "pca.json"
    save_pca_model(model, path)
    loaded = load_pca_model(path)
    assert_allclose(loaded.components, model.components)
    assert_allclose(loaded.mean, model.mean)
    assert loaded.d == 2 and loaded.D == 4
