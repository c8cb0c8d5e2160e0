"""Pinball-loss and empirical-quantile primitives.

Everything here is a pure function of its arguments. All computation is
64-bit floating point; quantiles are realized as order statistics so the
result is always one of the input values.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

__all__ = [
    "pinball_loss",
    "pinball_gradient",
    "empirical_quantile",
    "quantile_of_sorted",
    "weighted_quantile",
    "total_pinball_loss",
    "best_fixed_radius",
]


def _require_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha!r}")
    return alpha


def _require_beta(beta: float) -> float:
    beta = float(beta)
    if not (0.0 < beta < 1.0):
        raise ValueError(f"quantile level must lie strictly inside (0, 1), got {beta!r}")
    return beta


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def _as_finite_array(name: str, values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} must contain only finite values")
    return arr


def pinball_loss(alpha: float, true_radius: float, predicted: float) -> float:
    """Quantile (pinball) loss of a predicted radius against the realized one.

    Returns ``max((1 - alpha) * (s - p), alpha * (p - s))``; non-negative, and
    zero exactly when the prediction matches the true radius.
    """
    alpha = _require_alpha(alpha)
    s = _require_finite("true_radius", true_radius)
    p = _require_finite("predicted", predicted)
    return max((1.0 - alpha) * (s - p), alpha * (p - s))


def pinball_gradient(alpha: float, true_radius: float, predicted: float) -> float:
    """Subgradient of the pinball loss in the prediction: ``alpha - 1{p < s}``.

    A tie (p == s) counts as covered, so the output is ``alpha`` on coverage
    and ``alpha - 1`` on a miss; it is never zero.
    """
    alpha = _require_alpha(alpha)
    s = _require_finite("true_radius", true_radius)
    p = _require_finite("predicted", predicted)
    return alpha - 1.0 if p < s else alpha


def _order_index(n: int, beta: float) -> int:
    """1-based order-statistic index: the smallest k with k >= beta * n."""
    k = math.ceil(beta * n)
    if k < 1:
        return 1
    return n if k > n else k


def empirical_quantile(values: Sequence[float], beta: float) -> float:
    """Left-continuous empirical quantile: inf{s : #{v <= s} / n >= beta}.

    Realized as the ceil(beta * n)-th smallest value.
    """
    arr = _as_finite_array("values", values)
    beta = _require_beta(beta)
    k = _order_index(arr.size, beta)
    return float(np.partition(arr, k - 1)[k - 1])


def quantile_of_sorted(sorted_values: Sequence[float], beta: float) -> float:
    """``empirical_quantile`` for an already ascending-sorted sequence."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("sorted_values must be non-empty")
    return float(sorted_values[_order_index(n, _require_beta(beta)) - 1])


def weighted_quantile(values: Sequence[float], weights: Sequence[float], beta: float) -> float:
    """inf{s : sum of weights over v <= s >= beta * total weight}.

    Weights need not be normalized; with uniform weights this reduces exactly
    to ``empirical_quantile`` on the same inputs.
    """
    arr = _as_finite_array("values", values)
    w = _as_finite_array("weights", weights)
    beta = _require_beta(beta)
    if w.size != arr.size:
        raise ValueError("values and weights must have equal length")
    if (w < 0.0).any():
        raise ValueError("weights must be non-negative")
    total = float(w.sum())
    if total <= 0.0:
        raise ValueError("at least one weight must be strictly positive")
    order = np.argsort(arr, kind="stable")
    cumulative = np.cumsum(w[order])
    idx = int(np.searchsorted(cumulative, beta * total, side="left"))
    if idx >= arr.size:
        idx = arr.size - 1
    return float(arr[order[idx]])


def total_pinball_loss(alpha: float, values: Sequence[float], predicted: float) -> float:
    """Summed pinball loss of one constant prediction against many radii."""
    alpha = _require_alpha(alpha)
    arr = _as_finite_array("values", values)
    p = _require_finite("predicted", predicted)
    return float(np.maximum((1.0 - alpha) * (arr - p), alpha * (p - arr)).sum())


def best_fixed_radius(values: Sequence[float], alpha: float) -> tuple[float, float]:
    """Minimizer of the summed pinball loss over a constant radius, with its loss.

    The objective is piecewise-linear and convex with breakpoints at the data,
    so the minimum is attained at the (1 - alpha) empirical quantile.
    """
    alpha = _require_alpha(alpha)
    radius = empirical_quantile(values, 1.0 - alpha)
    return radius, total_pinball_loss(alpha, values, radius)
