"""
Tests for the finite-difference gradient check
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gradient_check import check_gradient, numeric_gradient


def test_numeric_gradient_of_a_quadratic():
    x = np.array([1.0, -2.0, 0.5])
    assert_allclose(numeric_gradient(lambda v: float((v ** 2).sum()), x), 2 * x, atol=1e-8)


def test_correct_gradient_passes():
    result = check_gradient(lambda v: (float((v ** 2).sum()), 2 * v), np.array([[1.0, 2.0], [3.0, -1.0]]))
    assert result.passed
    assert result.max_rel_error < 1e-8


def test_wrong_gradient_fails():
    result = check_gradient(lambda v: (float((v ** 2).sum()), v), np.array([1.0, 2.0]))
    assert not result.passed


def test_zero_gradient_passes_at_minimum():
    assert check_gradient(lambda v: (float((v ** 2).sum()), 2 * v), np.zeros(3)).passed


def test_shape_mismatch():
    with pytest.raises(ValueError, match="does not match input shape"):
        check_gradient(lambda v: (0.0, np.zeros(2)), np.zeros(3))
