"""Single-track online conformal predictors behind one predict/update contract.

Each learner is a sequential state machine: ``predict()`` is a deterministic
function of the current state, ``update()`` absorbs exactly one true radius
and advances the step counter. Driving loops alternate the two (``step()``
does both and returns the prediction that preceded the update).
"""

from __future__ import annotations

import abc
import math
from bisect import bisect_left, insort
from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import (
    _order_index,
    _require_alpha,
    _require_finite,
    quantile_of_sorted,
    weighted_quantile,
)

__all__ = [
    "OnlineRadiusLearner",
    "SCP",
    "NExCP",
    "ACI",
    "SFOGD",
    "FaciConfig",
    "FACI",
    "FACIRadius",
    "TrivialBaseline",
    "DEFAULT_FACI_GAMMAS",
]

DEFAULT_FACI_GAMMAS: tuple[float, ...] = (0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.064, 0.128)


def _require_radius_bound(d: float) -> float:
    d = float(d)
    if not (math.isfinite(d) and d > 0.0):
        raise ValueError(f"radius_bound must be finite and strictly positive, got {d!r}")
    return d


class OnlineRadiusLearner(abc.ABC):
    """Base contract for an online radius predictor."""

    def __init__(self, alpha: float, radius_bound: float) -> None:
        self.alpha = _require_alpha(alpha)
        self.d = _require_radius_bound(radius_bound)
        self._t = 0

    @property
    def steps_completed(self) -> int:
        return self._t

    @property
    def active_experts(self) -> int:
        """Number of live experts backing the prediction (1 for single-track learners)."""
        return 1

    @abc.abstractmethod
    def predict(self) -> float:
        """Radius prediction for the upcoming step; does not mutate state."""

    def update(self, true_radius: float) -> None:
        """Absorb one observed true radius and advance the step counter."""
        self._absorb(_require_finite("true_radius", true_radius))
        self._t += 1

    @abc.abstractmethod
    def _absorb(self, true_radius: float) -> None: ...

    def step(self, true_radius: float) -> float:
        """Predict, then update; returns the prediction made before the update."""
        predicted = self.predict()
        self.update(true_radius)
        return predicted


class SCP(OnlineRadiusLearner):
    """Split conformal baseline: the (1 - alpha) empirical quantile of past radii.

    Cold start (no history) predicts the full radius bound.
    """

    def __init__(self, alpha: float, radius_bound: float) -> None:
        super().__init__(alpha, radius_bound)
        self._sorted: list[float] = []

    def predict(self) -> float:
        if not self._sorted:
            return self.d
        return quantile_of_sorted(self._sorted, 1.0 - self.alpha)

    def _absorb(self, true_radius: float) -> None:
        insort(self._sorted, true_radius)


class NExCP(OnlineRadiusLearner):
    """Reweighted split conformal: geometric decay favours recent radii.

    The weight of the radius observed j steps ago is ``decay ** j``; the
    default decay is ``1 - 3 * alpha / 4``.
    """

    def __init__(self, alpha: float, radius_bound: float, decay: float | None = None) -> None:
        super().__init__(alpha, radius_bound)
        if decay is None:
            decay = 1.0 - 3.0 * self.alpha / 4.0
        decay = float(decay)
        if not (0.0 < decay <= 1.0):
            raise ValueError(f"decay must lie in (0, 1], got {decay!r}")
        self.decay = decay
        self._history: list[float] = []

    def predict(self) -> float:
        history = self._history
        if not history:
            return self.d
        n = len(history)
        weights = self.decay ** np.arange(n - 1, -1, -1, dtype=float)
        return weighted_quantile(history, weights, 1.0 - self.alpha)

    def _absorb(self, true_radius: float) -> None:
        self._history.append(true_radius)


class ACI(OnlineRadiusLearner):
    """Fixed-step online gradient descent on the radius.

    Update: ``s <- s + eta * (err - alpha)`` where err indicates a miss
    (prediction strictly below the true radius). Defaults: eta = d / 10,
    initial radius 0; with the initial radius inside [0, d] the empirical
    miscoverage satisfies |Err(T)| <= (d + eta) / (eta * T) identically.
    """

    def __init__(
        self,
        alpha: float,
        radius_bound: float,
        eta: float | None = None,
        init: float = 0.0,
    ) -> None:
        super().__init__(alpha, radius_bound)
        eta = self.d / 10.0 if eta is None else float(eta)
        if not (math.isfinite(eta) and eta > 0.0):
            raise ValueError(f"eta must be finite and strictly positive, got {eta!r}")
        self.eta = eta
        self._s = _require_finite("init", init)

    def predict(self) -> float:
        return self._s

    def _absorb(self, true_radius: float) -> None:
        err = 1.0 if self._s < true_radius else 0.0
        self._s += self.eta * (err - self.alpha)


class SFOGD(OnlineRadiusLearner):
    """Gradient descent whose effective step shrinks with cumulative squared gradients.

    Update: ``s <- s - eta * g / sqrt(sum of squared gradients so far)`` with
    g the pinball subgradient. The denominator is never zero because |g| >=
    min(alpha, 1 - alpha). The default rate eta = d / sqrt(3) is the one under
    which the anytime regret constant is (sqrt(3) + 1) * d.
    """

    def __init__(
        self,
        alpha: float,
        radius_bound: float,
        eta: float | None = None,
        init: float = 0.0,
    ) -> None:
        super().__init__(alpha, radius_bound)
        eta = self.d / math.sqrt(3.0) if eta is None else float(eta)
        if not (math.isfinite(eta) and eta > 0.0):
            raise ValueError(f"eta must be finite and strictly positive, got {eta!r}")
        self.eta = eta
        self._s = _require_finite("init", init)
        self._sum_sq = 0.0

    def predict(self) -> float:
        return self._s

    def _absorb(self, true_radius: float) -> None:
        g = self.alpha - 1.0 if self._s < true_radius else self.alpha
        self._sum_sq += g * g
        self._s -= self.eta * g / math.sqrt(self._sum_sq)


@dataclass(frozen=True)
class FaciConfig:
    """Hyperparameters of the expert-mixture learners.

    gammas: per-expert step sizes, strictly increasing.
    window: trailing-window length feeding the adaptive meta rate.
    sigma: uniform smoothing mass per expert; requires sigma * N <= 1.
    fixed_eta: bypass the adaptive schedule with a constant meta rate.
    """

    gammas: tuple[float, ...] = DEFAULT_FACI_GAMMAS
    window: int = 100
    sigma: float = 1.0 / 200.0
    fixed_eta: float | None = None

    def __post_init__(self) -> None:
        if len(self.gammas) < 1:
            raise ValueError("at least one expert rate is required")
        if any(g <= 0.0 or not math.isfinite(g) for g in self.gammas):
            raise ValueError("expert rates must be finite and strictly positive")
        if any(a >= b for a, b in zip(self.gammas, self.gammas[1:])):
            raise ValueError("expert rates must be strictly increasing")
        if self.window < 1:
            raise ValueError("window must be a positive integer")
        if not (0.0 < self.sigma < 1.0):
            raise ValueError("sigma must lie in (0, 1)")
        if self.sigma * len(self.gammas) > 1.0:
            raise ValueError("sigma * number of experts must not exceed 1")
        if self.fixed_eta is not None and (self.fixed_eta < 0.0 or not math.isfinite(self.fixed_eta)):
            raise ValueError("fixed_eta must be finite and non-negative")


class _ExpertMixture(OnlineRadiusLearner):
    """Shared meta machinery: exponential reweighting with uniform smoothing.

    The meta rate follows sqrt((log(N * window) + 2) / S) where S sums, over
    the trailing window, the probability-weighted mean squared expert loss;
    smoothing mixes the reweighted distribution with sigma mass per expert.
    """

    def __init__(self, alpha: float, radius_bound: float, config: FaciConfig) -> None:
        super().__init__(alpha, radius_bound)
        self.config = config
        self._gammas = np.asarray(config.gammas, dtype=float)
        n = self._gammas.size
        self._p = np.full(n, 1.0 / n)
        self._sq_window: deque[float] = deque(maxlen=config.window)

    @property
    def probabilities(self) -> np.ndarray:
        """Current meta distribution over experts (copy)."""
        return self._p.copy()

    def _meta_rate(self) -> float:
        if self.config.fixed_eta is not None:
            return self.config.fixed_eta
        denom = sum(self._sq_window)
        if denom <= 0.0:
            return 0.0
        n = self._gammas.size
        return math.sqrt((math.log(n * self.config.window) + 2.0) / denom)

    def _reweight(self, losses: np.ndarray) -> None:
        eta = self._meta_rate()
        mean_sq = float(self._p @ (losses * losses))
        scaled = self._p * np.exp(-eta * losses)
        z = float(scaled.sum())
        if z > 0.0 and math.isfinite(z):
            sigma = self.config.sigma
            self._p = (1.0 - sigma * losses.size) * (scaled / z) + sigma
        self._sq_window.append(mean_sq)


class FACI(_ExpertMixture):
    """Expert mixture over quantile levels, composed with the past-radius quantile.

    Each expert tracks a level with its own fixed-step update; the aggregated
    level (clipped to [1/n, 1 - 1/n] for a history of size n) indexes the
    empirical quantile of past radii. Cold start predicts the radius bound.
    """

    def __init__(
        self,
        alpha: float,
        radius_bound: float,
        config: FaciConfig | None = None,
    ) -> None:
        super().__init__(alpha, radius_bound, config or FaciConfig())
        self._levels = np.full(self._gammas.size, 1.0 - self.alpha)
        self._sorted: list[float] = []

    @property
    def levels(self) -> np.ndarray:
        """Current per-expert quantile levels (copy)."""
        return self._levels.copy()

    def predict(self) -> float:
        history = self._sorted
        if not history:
            return self.d
        n = len(history)
        if n == 1:
            return history[0]
        beta = float(self._p @ self._levels)
        beta = min(max(beta, 1.0 / n), 1.0 - 1.0 / n)
        return quantile_of_sorted(history, beta)

    def _absorb(self, true_radius: float) -> None:
        history = self._sorted
        if history:
            n = len(history)
            below = bisect_left(history, true_radius)
            level_star = below / n
            a = self.alpha
            losses = np.maximum(
                (1.0 - a) * (level_star - self._levels), a * (self._levels - level_star)
            )
            self._reweight(losses)
            errs = np.fromiter(
                (history[_order_index(n, b) - 1] < true_radius for b in self._levels),
                dtype=float,
                count=self._levels.size,
            )
            self._levels = self._levels + self._gammas * (errs - a)
        insort(history, true_radius)


class FACIRadius(_ExpertMixture):
    """Expert mixture tracking the radius directly.

    Experts are fixed-step radius updates with rates gamma * d; predictions
    aggregate expert radii under the meta distribution, and the meta rate is
    driven by pinball losses on the radii. A single expert reproduces ACI with
    eta = gamma * d exactly.
    """

    def __init__(
        self,
        alpha: float,
        radius_bound: float,
        config: FaciConfig | None = None,
    ) -> None:
        super().__init__(alpha, radius_bound, config or FaciConfig())
        self._radii = np.zeros(self._gammas.size)

    @property
    def radii(self) -> np.ndarray:
        """Current per-expert radii (copy)."""
        return self._radii.copy()

    def predict(self) -> float:
        return float(self._p @ self._radii)

    def _absorb(self, true_radius: float) -> None:
        a = self.alpha
        preds = self._radii
        losses = np.maximum((1.0 - a) * (true_radius - preds), a * (preds - true_radius))
        self._reweight(losses)
        errs = (preds < true_radius).astype(float)
        self._radii = preds + self._gammas * self.d * (errs - a)


class TrivialBaseline(OnlineRadiusLearner):
    """Data-independent schedule: full-radius predictions first, empty afterwards.

    Predicts the radius bound for the first floor((1 - alpha) * horizon) steps
    and zero for the rest, so the horizon must be known up front; stepping past
    it is an error.
    """

    def __init__(self, alpha: float, radius_bound: float, horizon: int) -> None:
        super().__init__(alpha, radius_bound)
        horizon = int(horizon)
        if horizon < 1:
            raise ValueError("horizon must be a positive integer")
        self.horizon = horizon
        self._full_steps = math.floor((1.0 - self.alpha) * horizon)

    def predict(self) -> float:
        return self.d if self._t < self._full_steps else 0.0

    def _absorb(self, true_radius: float) -> None:
        if self._t >= self.horizon:
            raise ValueError(f"cannot step beyond the configured horizon {self.horizon}")
