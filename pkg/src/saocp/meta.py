"""Strongly adaptive meta-learner over interval-localized experts.

A new expert is spawned at every step and lives for a dyadic-structured
number of steps: the expert born at step i stays active on
[i, i + lifetime(i) - 1], where lifetime(i) is a configurable multiple of the
largest power of two dividing i. At most ``multiplier * (floor(log2 t) + 1)``
experts are alive at step t.

Predictions aggregate the active experts under a prior that decays in the
birth index, reshaped by coin-betting weights; after each observation every
active expert takes a scale-free OGD step and its weight is refreshed from
the (meta loss - expert loss) reward signal.

A randomized mode replaces the weighted average with a single expert sampled
from the aggregation distribution and additionally records the expected
miscoverage of that distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import _require_alpha, _require_finite
from .learners import SFOGD, OnlineRadiusLearner, _require_radius_bound

__all__ = [
    "lifetime",
    "active_births",
    "prior_weights",
    "aggregation_weights",
    "aggregate_prediction",
    "expert_signal",
    "ExpertRecord",
    "coin_bet_update",
    "SAOCP",
]


def lifetime(birth: int, multiplier: int) -> int:
    """Active-interval length of the expert born at step ``birth``.

    Equals ``multiplier * 2**n`` where ``2**n`` is the largest power of two
    dividing ``birth``.
    """
    birth = int(birth)
    multiplier = int(multiplier)
    if birth < 1:
        raise ValueError("birth index must be >= 1")
    if multiplier < 1:
        raise ValueError("lifetime multiplier must be >= 1")
    return multiplier * (birth & -birth)


def active_births(t: int, multiplier: int) -> list[int]:
    """Birth indices of the experts alive at step t: {i : t - lifetime(i) < i <= t}."""
    t = int(t)
    if t < 1:
        raise ValueError("step index must be >= 1")
    return [i for i in range(1, t + 1) if t - lifetime(i, multiplier) < i]


def _prior_raw(birth: int) -> float:
    # i^-2 / (1 + floor(log2 i)); bit_length gives the exact integer log2.
    return 1.0 / (birth * birth * birth.bit_length())


def prior_weights(births: "list[int] | np.ndarray") -> np.ndarray:
    """Prior over the given birth indices, proportional to i^-2 / (1 + floor(log2 i))."""
    births = [int(b) for b in births]
    if not births:
        raise ValueError("the active set must be non-empty")
    if any(b < 1 for b in births):
        raise ValueError("birth indices must be >= 1")
    raw = np.array([_prior_raw(b) for b in births])
    return raw / raw.sum()


def aggregation_weights(prior: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Aggregation distribution: prior reshaped by the positive part of the weights.

    Falls back to the prior itself when no weight is positive.
    """
    prior = np.asarray(prior, dtype=float)
    shaped = prior * np.maximum(np.asarray(weights, dtype=float), 0.0)
    z = float(shaped.sum())
    if z > 0.0:
        return shaped / z
    return prior / prior.sum()


def aggregate_prediction(
    prior: np.ndarray,
    weights: np.ndarray,
    predictions: np.ndarray,
    t: int,
) -> float:
    """Aggregated radius for step t; pinned to 0 at the very first step."""
    if int(t) == 1:
        return 0.0
    p = aggregation_weights(prior, weights)
    return float(p @ np.asarray(predictions, dtype=float))


def expert_signal(meta_loss: float, expert_loss: float, weight: float, radius_bound: float) -> float:
    """Coin-betting reward: normalized loss gap, floored at zero for non-positive weights."""
    diff = (meta_loss - expert_loss) / radius_bound
    if weight > 0.0:
        return diff
    return diff if diff > 0.0 else 0.0


@dataclass(slots=True)
class ExpertRecord:
    """One live expert: birth step, lifetime, learner state, and betting sums."""

    birth: int
    lifetime: int
    learner: SFOGD
    weight: float = 0.0
    sum_signal: float = 0.0
    sum_weighted_signal: float = 0.0
    prior_raw: float = field(default=0.0)


def coin_bet_update(record: ExpertRecord, signal: float, t: int) -> float:
    """Advance a record's running sums and refresh its coin-betting weight.

    The weighted-signal sum uses the weight in force when the signal was
    earned, so it is accumulated before the weight is replaced.
    """
    record.sum_signal += signal
    record.sum_weighted_signal += record.weight * signal
    record.weight = record.sum_signal * (1.0 + record.sum_weighted_signal) / (t - record.birth + 1)
    return record.weight


class SAOCP(OnlineRadiusLearner):
    """Strongly adaptive online conformal prediction.

    Parameters
    ----------
    alpha:
        Target miscoverage level.
    radius_bound:
        Upper bound d on the true radii; expert rates default to d / sqrt(3).
    lifetime_multiplier:
        Scales every expert lifetime (8 suits time-series-like streams, 32
        label-set streams).
    randomized:
        Predict with a single expert sampled from the aggregation
        distribution instead of the weighted average; requires ``rng``.
    rng:
        numpy Generator (or seed) driving the randomized mode.
    """

    def __init__(
        self,
        alpha: float,
        radius_bound: float,
        lifetime_multiplier: int = 8,
        expert_eta: float | None = None,
        randomized: bool = False,
        rng: np.random.Generator | int | None = None,
    ) -> None:
        super().__init__(alpha, radius_bound)
        multiplier = int(lifetime_multiplier)
        if multiplier < 1:
            raise ValueError("lifetime_multiplier must be >= 1")
        self.multiplier = multiplier
        eta = self.d / math.sqrt(3.0) if expert_eta is None else float(expert_eta)
        if not (math.isfinite(eta) and eta > 0.0):
            raise ValueError(f"expert_eta must be finite and strictly positive, got {eta!r}")
        self.eta = eta
        self.randomized = bool(randomized)
        if self.randomized:
            if rng is None:
                raise ValueError("randomized mode requires an rng or seed")
            self._rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        else:
            self._rng = None
        self._experts: list[ExpertRecord] = []
        self._last_prediction = 0.0
        self._pending: tuple[float, np.ndarray, np.ndarray] | None = None
        self.last_probabilities: np.ndarray | None = None
        self.last_expected_err: float | None = None
        self._spawn(1)

    @property
    def active_experts(self) -> int:
        return len(self._experts)

    @property
    def expert_births(self) -> tuple[int, ...]:
        return tuple(record.birth for record in self._experts)

    def _spawn(self, birth: int) -> None:
        self._experts.append(
            ExpertRecord(
                birth=birth,
                lifetime=lifetime(birth, self.multiplier),
                learner=SFOGD(self.alpha, self.d, eta=self.eta, init=self._last_prediction),
                prior_raw=_prior_raw(birth),
            )
        )

    def _compute_prediction(self) -> tuple[float, np.ndarray, np.ndarray]:
        t = self._t + 1
        records = self._experts
        n = len(records)
        raw = np.fromiter((r.prior_raw for r in records), dtype=float, count=n)
        prior = raw / raw.sum()
        weights = np.fromiter((r.weight for r in records), dtype=float, count=n)
        predictions = np.fromiter((r.learner.predict() for r in records), dtype=float, count=n)
        p = aggregation_weights(prior, weights)
        if t == 1:
            s_hat = 0.0
        elif self.randomized:
            cumulative = np.cumsum(p)
            idx = int(np.searchsorted(cumulative, self._rng.random(), side="right"))
            if idx >= n:
                idx = n - 1
            s_hat = float(predictions[idx])
        else:
            s_hat = float(p @ predictions)
        return s_hat, p, predictions

    def predict(self) -> float:
        if self._pending is None:
            self._pending = self._compute_prediction()
        return self._pending[0]

    def _absorb(self, true_radius: float) -> None:
        pending = self._pending if self._pending is not None else self._compute_prediction()
        self._pending = None
        s_hat, p, predictions = pending
        t = self._t + 1
        a = self.alpha
        d = self.d
        s = true_radius
        meta_loss = max((1.0 - a) * (s - s_hat), a * (s_hat - s))
        self.last_probabilities = p
        if self.randomized:
            self.last_expected_err = float(p @ (predictions < s))
        for i, record in enumerate(self._experts):
            pred_i = predictions[i]
            expert_loss = max((1.0 - a) * (s - pred_i), a * (pred_i - s))
            record.learner.update(s)
            signal = expert_signal(meta_loss, expert_loss, record.weight, d)
            coin_bet_update(record, signal, t)
        self._last_prediction = s_hat
        upcoming = t + 1
        self._experts = [r for r in self._experts if upcoming < r.birth + r.lifetime]
        self._spawn(upcoming)
