"""Run-level evaluation: coverage, localized coverage, windowed regret, widths.

All metrics are pure functions over immutable per-step trace records. Window
metrics slide by one step, so a window length k on a trace of length T
evaluates T - k + 1 windows.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import _order_index, _require_alpha, best_fixed_radius

__all__ = [
    "StepTrace",
    "MetricsReport",
    "coverage_error",
    "local_coverage_error",
    "best_fixed_window_losses",
    "sa_regret",
    "path_length",
    "quantile_variation",
    "local_series",
    "summarize",
    "global_regret",
]


@dataclass(frozen=True)
class StepTrace:
    """One step of a run: prediction, outcome, and bookkeeping."""

    t: int
    predicted: float
    true_radius: float
    err: int
    loss: float
    width: float
    active_experts: int = 1
    expected_err: float | None = None


@dataclass
class MetricsReport:
    """Aggregated quantities for one run."""

    coverage: float
    coverage_error: float
    lce: dict[int, float] = field(default_factory=dict)
    sa_regret: dict[int, float] = field(default_factory=dict)
    width_median: float = 0.0
    path_length: float = 0.0
    clip_count: int = 0
    coverage_expected: float | None = None

    def to_text(self) -> str:
        """Flat key-value rendering, one field per line."""
        lines = [
            f"coverage = {self.coverage!r}",
            f"coverage_error = {self.coverage_error!r}",
            f"width_median = {self.width_median!r}",
            f"path_length = {self.path_length!r}",
            f"clip_count = {self.clip_count}",
        ]
        if self.coverage_expected is not None:
            lines.append(f"coverage_expected = {self.coverage_expected!r}")
        for k in sorted(self.lce):
            lines.append(f"lce.{k} = {self.lce[k]!r}")
        for k in sorted(self.sa_regret):
            lines.append(f"sa_regret.{k} = {self.sa_regret[k]!r}")
        return "\n".join(lines) + "\n"

    def csv_fields(self) -> tuple[list[str], list[str]]:
        """(header, row) pair for a flat CSV rendering."""
        header = ["coverage", "coverage_error", "width_median", "path_length", "clip_count"]
        row = [
            repr(self.coverage),
            repr(self.coverage_error),
            repr(self.width_median),
            repr(self.path_length),
            str(self.clip_count),
        ]
        if self.coverage_expected is not None:
            header.append("coverage_expected")
            row.append(repr(self.coverage_expected))
        for k in sorted(self.lce):
            header.append(f"lce_{k}")
            row.append(repr(self.lce[k]))
        for k in sorted(self.sa_regret):
            header.append(f"sa_regret_{k}")
            row.append(repr(self.sa_regret[k]))
        return header, row


def _trace_array(trace: Sequence[StepTrace], attr: str) -> np.ndarray:
    if len(trace) == 0:
        raise ValueError("trace must be non-empty")
    return np.fromiter((getattr(s, attr) for s in trace), dtype=float, count=len(trace))


def coverage_error(trace: Sequence[StepTrace], alpha: float) -> float:
    """Absolute gap between the empirical miss frequency and alpha."""
    alpha = _require_alpha(alpha)
    errs = _trace_array(trace, "err")
    return abs(float(errs.mean()) - alpha)


def _window_means(values: np.ndarray, k: int) -> np.ndarray:
    cumulative = np.concatenate(([0.0], np.cumsum(values)))
    return (cumulative[k:] - cumulative[:-k]) / k


def local_coverage_error(trace: Sequence[StepTrace], alpha: float, k: int) -> float:
    """Worst absolute deviation of the windowed miss frequency from alpha."""
    alpha = _require_alpha(alpha)
    errs = _trace_array(trace, "err")
    k = int(k)
    if not 1 <= k <= errs.size:
        raise ValueError(f"window length {k} must lie in [1, {errs.size}]")
    return float(np.abs(alpha - _window_means(errs, k)).max())


def best_fixed_window_losses(radii: Sequence[float], alpha: float, k: int) -> np.ndarray:
    """Minimum summed pinball loss of a constant radius, for every length-k window.

    Vectorized over all T - k + 1 windows: each window is sorted once and the
    minimum sits at its (1 - alpha) empirical quantile.
    """
    alpha = _require_alpha(alpha)
    arr = np.asarray(radii, dtype=float)
    k = int(k)
    if not 1 <= k <= arr.size:
        raise ValueError(f"window length {k} must lie in [1, {arr.size}]")
    windows = np.sort(sliding_window_view(arr, k), axis=1)
    cumulative = np.cumsum(windows, axis=1)
    idx = _order_index(k, 1.0 - alpha)
    s_star = windows[:, idx - 1]
    head = cumulative[:, idx - 1]
    total = cumulative[:, -1]
    return alpha * (idx * s_star - head) + (1.0 - alpha) * ((total - head) - (k - idx) * s_star)


def sa_regret(trace: Sequence[StepTrace], alpha: float, k: int) -> float:
    """Worst windowed regret: realized loss minus the best fixed radius, per window."""
    alpha = _require_alpha(alpha)
    losses = _trace_array(trace, "loss")
    radii = _trace_array(trace, "true_radius")
    k = int(k)
    if not 1 <= k <= losses.size:
        raise ValueError(f"window length {k} must lie in [1, {losses.size}]")
    cumulative = np.concatenate(([0.0], np.cumsum(losses)))
    window_losses = cumulative[k:] - cumulative[:-k]
    return float((window_losses - best_fixed_window_losses(radii, alpha, k)).max())


def path_length(radii: Sequence[float]) -> float:
    """Total variation of the radii over the interval."""
    arr = np.asarray(radii, dtype=float)
    if arr.size == 0:
        raise ValueError("interval must be non-empty")
    if arr.size == 1:
        return 0.0
    return float(np.abs(np.diff(arr)).sum())


def quantile_variation(known_quantiles: Sequence[float] | None, radius_bound: float) -> float:
    """Dispersion of the generator-known per-step quantiles, normalized by the bound.

    Sum of squared deviations of q_t / d from their mean; invariant under
    scaling quantiles and bound together. Only defined for streams whose
    generator exposes its quantiles.
    """
    if known_quantiles is None:
        raise ValueError("known quantiles are unavailable for this stream")
    arr = np.asarray(known_quantiles, dtype=float)
    if arr.size == 0:
        raise ValueError("known quantiles are unavailable for this stream")
    normalized = arr / float(radius_bound)
    return float(((normalized - normalized.mean()) ** 2).sum())


def local_series(trace: Sequence[StepTrace], k: int) -> tuple[np.ndarray, np.ndarray]:
    """Sliding-window means of the coverage indicator and of the set width/size."""
    errs = _trace_array(trace, "err")
    widths = _trace_array(trace, "width")
    k = int(k)
    if not 1 <= k <= errs.size:
        raise ValueError(f"window length {k} must lie in [1, {errs.size}]")
    return _window_means(1.0 - errs, k), _window_means(widths, k)


def summarize(
    trace: Sequence[StepTrace],
    alpha: float,
    windows: Iterable[int] = (20,),
    clip_count: int = 0,
) -> MetricsReport:
    """Populate a full report; window metrics with k > T are omitted with a warning.

    When the trace carries expected miscoverage (randomized prediction mode),
    the headline coverage error uses it and the realized coverage is still
    reported alongside.
    """
    alpha = _require_alpha(alpha)
    errs = _trace_array(trace, "err")
    radii = _trace_array(trace, "true_radius")
    widths = _trace_array(trace, "width")
    horizon = errs.size

    expected = [s.expected_err for s in trace]
    coverage = 1.0 - float(errs.mean())
    if all(e is not None for e in expected):
        expected_arr = np.asarray(expected, dtype=float)
        report_coverage_error = abs(float(expected_arr.mean()) - alpha)
        coverage_expected = 1.0 - float(expected_arr.mean())
    else:
        report_coverage_error = abs(float(errs.mean()) - alpha)
        coverage_expected = None

    report = MetricsReport(
        coverage=coverage,
        coverage_error=report_coverage_error,
        width_median=float(np.median(widths)),
        path_length=path_length(radii),
        clip_count=int(clip_count),
        coverage_expected=coverage_expected,
    )
    for k in windows:
        k = int(k)
        if k < 1 or k > horizon:
            warnings.warn(
                f"window {k} does not fit a trace of length {horizon}; omitted",
                stacklevel=2,
            )
            continue
        report.lce[k] = local_coverage_error(trace, alpha, k)
        report.sa_regret[k] = sa_regret(trace, alpha, k)
    return report


def global_regret(trace: Sequence[StepTrace], alpha: float) -> float:
    """Total realized loss minus the best fixed radius in hindsight."""
    losses = _trace_array(trace, "loss")
    radii = _trace_array(trace, "true_radius")
    _, oracle = best_fixed_radius(radii, alpha)
    return float(losses.sum()) - oracle
