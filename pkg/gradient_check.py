"""
Central finite-difference check of analytic gradients
"""

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np


@dataclass
class GradientCheckResult:
    max_rel_error: float
    passed: bool
    analytic: np.ndarray
    numeric: np.ndarray


def numeric_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, out = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = fn(x)
        flat[i] = original - h
        minus = fn(x)
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * h)
    return grad


def check_gradient(fn: Callable[[np.ndarray], Tuple[float, np.ndarray]], x: np.ndarray,
                   h: float = 1e-4, rtol: float = 1e-4, atol: float = 1e-10) -> GradientCheckResult:
    """
    Compare fn's analytic gradient with central differences at x

    Args:
        fn: maps x to (value, gradient with x's shape)
        x: evaluation point
        h: finite-difference step
        rtol: tolerance on ||analytic - numeric|| / max(||analytic||, ||numeric||)
        atol: absolute floor for gradients that are (near) zero
    """
    x = np.asarray(x, dtype=np.float64)
    _, analytic = fn(x.copy())
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != x.shape:
        raise ValueError(f"gradient shape {analytic.shape} does not match input shape {x.shape}")
    numeric = numeric_gradient(lambda v: fn(v)[0], x, h)

    diff = float(np.linalg.norm(analytic - numeric))
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)))
    rel = diff / scale if scale > 0 else diff
    return GradientCheckResult(max_rel_error=rel, passed=diff <= rtol * scale + atol,
                               analytic=analytic, numeric=numeric)
