"""Nested prediction-set constructors and radius extraction.

Bridges raw model outputs (point forecasts, class probabilities) to the
scalar radius stream: the true radius of a step is the smallest radius whose
set covers the realized outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import _require_finite

__all__ = [
    "RegressionPoint",
    "ClassificationPoint",
    "interval_radius",
    "interval_set",
    "raps_scores",
    "raps_score",
    "raps_set",
    "oracle_set_size",
    "raps_radius_bound",
    "RAPS_PROFILES",
]

# Named (lambda, k_reg) regularization profiles; the first suits ~200-class
# problems, the second ~1000-class ones.
RAPS_PROFILES: dict[str, tuple[float, int]] = {
    "kreg20": (0.01, 20),
    "kreg10": (0.01, 10),
}

_PROB_SUM_TOL = 1e-6


@dataclass(frozen=True)
class RegressionPoint:
    """Ground truth and point forecast for one regression step."""

    y: float
    yhat: float
    horizon: int = 1

    def __post_init__(self) -> None:
        _require_finite("y", self.y)
        _require_finite("yhat", self.yhat)
        if int(self.horizon) < 1:
            raise ValueError("horizon must be a positive integer")


@dataclass(frozen=True)
class ClassificationPoint:
    """Class probabilities, realized label, randomization draw, and set regularizers.

    Probabilities must be non-negative and sum to 1 within 1e-6; they are
    renormalized on construction so downstream arithmetic sees an exact
    simplex point.
    """

    probs: tuple[float, ...]
    label: int
    u: float
    lam: float = 0.01
    k_reg: int = 20

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size < 2:
            raise ValueError("probs must hold at least two classes")
        if not np.isfinite(probs).all() or (probs < 0.0).any():
            raise ValueError("probs must be finite and non-negative")
        total = float(probs.sum())
        if abs(total - 1.0) > _PROB_SUM_TOL:
            raise ValueError(f"probs must sum to 1 within {_PROB_SUM_TOL}, got {total!r}")
        object.__setattr__(self, "probs", tuple(probs / total))
        if not 0 <= int(self.label) < probs.size:
            raise ValueError(f"label {self.label!r} out of range for {probs.size} classes")
        if not (0.0 <= float(self.u) <= 1.0):
            raise ValueError("u must lie in [0, 1]")
        if not (math.isfinite(self.lam) and self.lam >= 0.0):
            raise ValueError("lam must be finite and non-negative")
        if int(self.k_reg) < 1:
            raise ValueError("k_reg must be a positive integer")

    @property
    def num_classes(self) -> int:
        return len(self.probs)


def interval_radius(point: RegressionPoint) -> float:
    """Smallest radius whose interval around the forecast covers the truth."""
    return abs(point.y - point.yhat)


def interval_set(yhat: float, radius: float) -> tuple[float, float]:
    """Symmetric interval [yhat - radius, yhat + radius]; lo > hi marks empty."""
    yhat = _require_finite("yhat", yhat)
    radius = _require_finite("radius", radius)
    return yhat - radius, yhat + radius


def _ranked(point: ClassificationPoint) -> tuple[np.ndarray, np.ndarray]:
    probs = np.asarray(point.probs)
    # Stable sort on the negated probabilities: ties break by ascending class index.
    order = np.argsort(-probs, kind="stable")
    return order, probs[order]


def raps_scores(point: ClassificationPoint) -> np.ndarray:
    """Score of every class under the regularized adaptive construction.

    For the class ranked r (1-based, descending probability) the score is
    ``lam * sqrt(max(r - k_reg, 0)) + u * p_(r) + sum of the r - 1 heavier
    probabilities``; non-decreasing in the rank.
    """
    order, p_sorted = _ranked(point)
    m = p_sorted.size
    prefix = np.concatenate(([0.0], np.cumsum(p_sorted)[:-1]))
    ranks = np.arange(1, m + 1, dtype=float)
    regularizer = point.lam * np.sqrt(np.maximum(ranks - point.k_reg, 0.0))
    by_rank = regularizer + point.u * p_sorted + prefix
    scores = np.empty(m)
    scores[order] = by_rank
    return scores


def raps_score(point: ClassificationPoint, target: int) -> float:
    """Score of one class; the true radius of the step is the label's score."""
    target = int(target)
    if not 0 <= target < point.num_classes:
        raise ValueError(f"target {target!r} out of range for {point.num_classes} classes")
    return float(raps_scores(point)[target])


def raps_set(point: ClassificationPoint, radius: float) -> tuple[frozenset[int], int]:
    """Label set at the given radius: classes whose score is <= radius.

    Nested in the radius; empty below zero since scores are non-negative.
    """
    radius = _require_finite("radius", radius)
    members = np.nonzero(raps_scores(point) <= radius)[0]
    return frozenset(int(i) for i in members), int(members.size)


def oracle_set_size(point: ClassificationPoint) -> int:
    """Size of the smallest set covering the true label; always >= 1."""
    scores = raps_scores(point)
    return int((scores <= scores[point.label]).sum())


def raps_radius_bound(num_classes: int, lam: float = 0.01, k_reg: int = 20) -> float:
    """Upper bound on any score: 1 + lam * sqrt(max(m - k_reg, 0))."""
    num_classes = int(num_classes)
    if num_classes < 2:
        raise ValueError("num_classes must be >= 2")
    return 1.0 + lam * math.sqrt(max(num_classes - k_reg, 0))
