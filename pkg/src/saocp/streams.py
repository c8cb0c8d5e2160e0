"""Synthetic radius streams with generator-known quantiles, plus CSV ingestion.

Synthetic generators draw radii as ``level_t + noise`` and clip into [0, d],
counting every out-of-range draw. Because clipping is monotone, the per-step
(1 - alpha) quantile of the emitted distribution is exactly the clipped
quantile of ``level_t + noise``, so these streams carry exact ground-truth
quantiles for the metrics that need them.

CSV ingestion accepts three schemas (see ``ingest_csv``); regression rows are
reduced to absolute residuals and classification rows to the label's score
under the regularized adaptive set construction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Iterator, Sequence

import numpy as np

from .core import _require_alpha
from .seeding import substream
from .sets import ClassificationPoint, RegressionPoint, interval_radius, raps_score

__all__ = [
    "RadiusObservation",
    "Stream",
    "StreamFormatError",
    "gen_constant",
    "gen_sudden_shift",
    "gen_gradual_shift",
    "gen_random_walk",
    "ingest_csv",
]

_NOISE_KINDS = ("none", "gaussian", "uniform")


class StreamFormatError(ValueError):
    """CSV ingestion failure, carrying the offending 1-based line number."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class RadiusObservation:
    """One step of a radius stream."""

    t: int
    true_radius: float
    payload: RegressionPoint | ClassificationPoint | None = None


@dataclass
class Stream:
    """Materialized radius stream, iterable as RadiusObservation records.

    ``radii`` are already clipped into [0, d]; ``clipped`` counts how many
    raw values fell outside. ``known_quantiles`` is None for ingested data.
    """

    radii: np.ndarray
    d: float
    known_quantiles: np.ndarray | None = None
    payloads: list | None = None
    clipped: int = 0
    times: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.radii = np.asarray(self.radii, dtype=float)
        if self.times is None:
            self.times = np.arange(1, self.radii.size + 1)

    def __len__(self) -> int:
        return int(self.radii.size)

    def __iter__(self) -> Iterator[RadiusObservation]:
        payloads = self.payloads
        for i in range(self.radii.size):
            yield RadiusObservation(
                t=int(self.times[i]),
                true_radius=float(self.radii[i]),
                payload=None if payloads is None else payloads[i],
            )


def _noise_offset(noise: str, scale: float, level: float) -> float:
    """Quantile of the noise distribution at the given level."""
    if noise == "none" or scale == 0.0:
        return 0.0
    if noise == "gaussian":
        return scale * NormalDist().inv_cdf(level)
    if noise == "uniform":
        return scale * (2.0 * level - 1.0)
    raise ValueError(f"unknown noise kind {noise!r}; expected one of {_NOISE_KINDS}")


def _resolve_bound(raw: np.ndarray, d: float | str, calibration_prefix: int | None) -> float:
    if isinstance(d, str):
        if d != "auto":
            raise ValueError(f"d must be a positive number or 'auto', got {d!r}")
        if calibration_prefix is None:
            raise ValueError("calibration_prefix is required when d='auto'")
        prefix = int(calibration_prefix)
        if not 1 <= prefix <= raw.size:
            raise ValueError(f"calibration_prefix must lie in [1, {raw.size}]")
        bound = float(raw[:prefix].max())
        if bound <= 0.0:
            raise ValueError("auto radius bound resolved to a non-positive value")
        return bound
    bound = float(d)
    if not (math.isfinite(bound) and bound > 0.0):
        raise ValueError(f"d must be finite and strictly positive, got {d!r}")
    return bound


def _materialize(
    levels: np.ndarray,
    *,
    alpha: float,
    noise: str,
    noise_scale: float,
    seed: int | None,
    d: float | str,
    calibration_prefix: int | None,
    rng: np.random.Generator | None = None,
) -> Stream:
    alpha = _require_alpha(alpha)
    if noise not in _NOISE_KINDS:
        raise ValueError(f"unknown noise kind {noise!r}; expected one of {_NOISE_KINDS}")
    if noise_scale < 0.0:
        raise ValueError("noise scale must be non-negative")
    horizon = levels.size
    if noise == "none" or noise_scale == 0.0:
        draws = np.zeros(horizon)
    else:
        if rng is None:
            if seed is None:
                raise ValueError("a seed is mandatory for stochastic streams")
            rng = substream(seed, "noise")
        if noise == "gaussian":
            draws = rng.normal(0.0, noise_scale, horizon)
        else:
            draws = rng.uniform(-noise_scale, noise_scale, horizon)
    raw = levels + draws
    bound = _resolve_bound(raw, d, calibration_prefix)
    radii = np.clip(raw, 0.0, bound)
    clipped = int((raw != radii).sum())
    offset = _noise_offset(noise, noise_scale, 1.0 - alpha)
    quantiles = np.clip(levels + offset, 0.0, bound)
    return Stream(radii=radii, d=bound, known_quantiles=quantiles, clipped=clipped)


def gen_constant(
    level: float,
    horizon: int,
    *,
    alpha: float,
    d: float | str,
    noise: str = "none",
    noise_scale: float = 0.0,
    seed: int | None = None,
    calibration_prefix: int | None = None,
) -> Stream:
    """Single-level stream."""
    horizon = _check_horizon(horizon)
    levels = np.full(horizon, float(level))
    return _materialize(
        levels,
        alpha=alpha,
        noise=noise,
        noise_scale=noise_scale,
        seed=seed,
        d=d,
        calibration_prefix=calibration_prefix,
    )


def gen_sudden_shift(
    levels: Sequence[float],
    segment: int,
    horizon: int,
    *,
    alpha: float,
    d: float | str,
    noise: str = "none",
    noise_scale: float = 0.0,
    seed: int | None = None,
    calibration_prefix: int | None = None,
) -> Stream:
    """Levels cycle every ``segment`` steps."""
    horizon = _check_horizon(horizon)
    segment = _check_segment(segment)
    values = np.asarray(levels, dtype=float)
    if values.size < 2:
        raise ValueError("a sudden-shift stream needs at least two levels")
    path = values[(np.arange(horizon) // segment) % values.size]
    return _materialize(
        path,
        alpha=alpha,
        noise=noise,
        noise_scale=noise_scale,
        seed=seed,
        d=d,
        calibration_prefix=calibration_prefix,
    )


def gen_gradual_shift(
    start: float,
    end: float,
    stages: int,
    segment: int,
    horizon: int,
    *,
    alpha: float,
    d: float | str,
    noise: str = "none",
    noise_scale: float = 0.0,
    seed: int | None = None,
    calibration_prefix: int | None = None,
) -> Stream:
    """Level steps linearly from start to end across ``stages`` segments, then cycles."""
    horizon = _check_horizon(horizon)
    segment = _check_segment(segment)
    stages = int(stages)
    if stages < 2:
        raise ValueError("a gradual-shift stream needs at least two stages")
    ladder = np.linspace(float(start), float(end), stages)
    path = ladder[(np.arange(horizon) // segment) % stages]
    return _materialize(
        path,
        alpha=alpha,
        noise=noise,
        noise_scale=noise_scale,
        seed=seed,
        d=d,
        calibration_prefix=calibration_prefix,
    )


def gen_random_walk(
    start: float,
    walk_scale: float,
    horizon: int,
    *,
    alpha: float,
    d: float | str,
    noise: str = "none",
    noise_scale: float = 0.0,
    seed: int | None = None,
    calibration_prefix: int | None = None,
) -> Stream:
    """Level follows a Gaussian random walk; radii are the level plus noise, clipped.

    The walk itself is unclipped; only the emitted radii (and the known
    quantiles) are clipped into [0, d].
    """
    horizon = _check_horizon(horizon)
    if walk_scale < 0.0:
        raise ValueError("walk scale must be non-negative")
    if seed is None:
        raise ValueError("a seed is mandatory for stochastic streams")
    rng = substream(seed, "noise")
    increments = rng.normal(0.0, walk_scale, horizon)
    path = float(start) + np.cumsum(increments)
    return _materialize(
        path,
        alpha=alpha,
        noise=noise,
        noise_scale=noise_scale,
        seed=seed,
        d=d,
        calibration_prefix=calibration_prefix,
        rng=rng,
    )


def _check_horizon(horizon: int) -> int:
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be a positive integer")
    return horizon


def _check_segment(segment: int) -> int:
    segment = int(segment)
    if segment < 1:
        raise ValueError("segment length must be a positive integer")
    return segment


_SCHEMA_RADIUS = "radius"
_SCHEMA_REGRESSION = "regression"
_SCHEMA_CLASSIFICATION = "classification"


def _detect_schema(header: list[str], line: int) -> str:
    normalized = [h.strip().lower() for h in header]
    if normalized == ["t", "radius"]:
        return _SCHEMA_RADIUS
    if normalized in (["t", "y", "yhat"], ["t", "y", "yhat", "h"]):
        return _SCHEMA_REGRESSION
    if (
        len(normalized) >= 4
        and normalized[:2] == ["t", "label"]
        and normalized[2:] == [f"p{i}" for i in range(len(normalized) - 2)]
    ):
        return _SCHEMA_CLASSIFICATION
    raise StreamFormatError(line, f"unknown schema with header {header!r}")


def _parse_float(field_name: str, value: str, line: int) -> float:
    try:
        parsed = float(value)
    except ValueError:
        raise StreamFormatError(line, f"{field_name} is not a number: {value!r}") from None
    if not math.isfinite(parsed):
        raise StreamFormatError(line, f"{field_name} must be finite, got {value!r}")
    return parsed


def _parse_int(field_name: str, value: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise StreamFormatError(line, f"{field_name} is not an integer: {value!r}") from None


def ingest_csv(
    path: str,
    *,
    d: float | str,
    calibration_prefix: int | None = None,
    raps_lambda: float = 0.01,
    raps_kreg: int = 20,
    seed: int | None = None,
) -> Stream:
    """Read a radius stream from a CSV file.

    Schemas (detected from the header row):
      A  ``t,radius``                 raw radii
      B  ``t,y,yhat[,h]``             regression; radius = |y - yhat|
      C  ``t,label,p0,...,p{m-1}``    classification; radius = the label's
                                      regularized-adaptive score with one
                                      seeded uniform draw per row

    ``t`` must be strictly increasing integers; any non-finite or malformed
    cell rejects the file with its line number. Radii are clipped into
    [0, d] (d may be 'auto' over a calibration prefix) with a clip count.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise StreamFormatError(1, "empty file")
    schema = _detect_schema(rows[0], 1)
    width = len(rows[0])
    rng = None
    if schema == _SCHEMA_CLASSIFICATION:
        if seed is None:
            raise ValueError("a seed is mandatory for classification ingestion")
        rng = substream(seed, "classification-u")

    times: list[int] = []
    raw_radii: list[float] = []
    payloads: list = []
    previous_t: int | None = None
    for offset, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise StreamFormatError(offset, f"expected {width} fields, got {len(row)}")
        t = _parse_int("t", row[0], offset)
        if previous_t is not None and t <= previous_t:
            raise StreamFormatError(offset, f"t must be strictly increasing, got {t} after {previous_t}")
        previous_t = t
        times.append(t)
        if schema == _SCHEMA_RADIUS:
            raw_radii.append(_parse_float("radius", row[1], offset))
            payloads.append(None)
        elif schema == _SCHEMA_REGRESSION:
            y = _parse_float("y", row[1], offset)
            yhat = _parse_float("yhat", row[2], offset)
            horizon = _parse_int("h", row[3], offset) if width == 4 else 1
            point = RegressionPoint(y=y, yhat=yhat, horizon=horizon)
            raw_radii.append(interval_radius(point))
            payloads.append(point)
        else:
            label = _parse_int("label", row[1], offset)
            probs = tuple(_parse_float(f"p{i}", row[2 + i], offset) for i in range(width - 2))
            try:
                point = ClassificationPoint(
                    probs=probs,
                    label=label,
                    u=float(rng.random()),
                    lam=float(raps_lambda),
                    k_reg=int(raps_kreg),
                )
            except ValueError as exc:
                raise StreamFormatError(offset, str(exc)) from None
            raw_radii.append(raps_score(point, label))
            payloads.append(point)
    if not raw_radii:
        raise StreamFormatError(2, "no data rows")

    raw = np.asarray(raw_radii, dtype=float)
    bound = _resolve_bound(raw, d, calibration_prefix)
    radii = np.clip(raw, 0.0, bound)
    clipped = int((raw != radii).sum())
    return Stream(
        radii=radii,
        d=bound,
        known_quantiles=None,
        payloads=payloads,
        clipped=clipped,
        times=np.asarray(times, dtype=int),
    )
