"""Flat dotted-key run configuration.

The on-disk format is a plain text document of ``key = value`` lines with
dotted sections (``method.name``, ``stream.kind``), ``#`` comments, and blank
lines. Unknown keys are rejected, and ``parse_config(serialize_config(c))``
reproduces ``c`` exactly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields, replace

__all__ = [
    "ConfigError",
    "MethodConfig",
    "StreamConfig",
    "RunConfig",
    "parse_config",
    "serialize_config",
    "load_config",
    "validate_config",
    "stream_fingerprint",
    "with_overrides",
    "METHOD_NAMES",
    "STREAM_KINDS",
]

METHOD_NAMES = ("scp", "nexcp", "aci", "sfogd", "faci", "faci-s", "trivial", "saocp")
STREAM_KINDS = ("constant", "sudden_shift", "gradual_shift", "random_walk", "from_file")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class MethodConfig:
    name: str = "saocp"
    eta: float | None = None
    init: float = 0.0
    lifetime_multiplier: int = 8
    randomized: bool = False
    decay: float | None = None
    gammas: tuple[float, ...] | None = None
    meta_window: int = 100
    sigma: float | None = None
    fixed_eta: float | None = None


@dataclass(frozen=True)
class StreamConfig:
    kind: str = "constant"
    horizon: int = 100
    level: float | None = None
    levels: tuple[float, ...] | None = None
    segment: int | None = None
    start: float | None = None
    end: float | None = None
    stages: int | None = None
    walk_scale: float | None = None
    noise: str = "none"
    noise_scale: float = 0.0
    path: str | None = None
    raps_lambda: float | None = None
    raps_kreg: int | None = None


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 0.1
    d: float | str = "auto"
    calibration_prefix: int | None = None
    seed: int = 0
    windows: tuple[int, ...] = (20,)
    method: MethodConfig = field(default_factory=MethodConfig)
    stream: StreamConfig = field(default_factory=StreamConfig)
    out_trace: str | None = None
    out_report: str | None = None


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_float_or_auto(text: str) -> float | str:
    if text == "auto":
        return "auto"
    return float(text)


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part.strip()) for part in text.split(",") if part.strip())


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(part.strip()) for part in text.split(",") if part.strip())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


# key -> (section, attribute, parser). section None means top level.
_KEYS: dict[str, tuple[str | None, str, object]] = {
    "alpha": (None, "alpha", float),
    "d": (None, "d", _parse_float_or_auto),
    "calibration_prefix": (None, "calibration_prefix", int),
    "seed": (None, "seed", int),
    "windows": (None, "windows", _parse_int_list),
    "method.name": ("method", "name", str),
    "method.eta": ("method", "eta", float),
    "method.init": ("method", "init", float),
    "method.g": ("method", "lifetime_multiplier", int),
    "method.randomized": ("method", "randomized", _parse_bool),
    "method.decay": ("method", "decay", float),
    "method.gammas": ("method", "gammas", _parse_float_list),
    "method.window": ("method", "meta_window", int),
    "method.sigma": ("method", "sigma", float),
    "method.eta_fixed": ("method", "fixed_eta", float),
    "stream.kind": ("stream", "kind", str),
    "stream.t": ("stream", "horizon", int),
    "stream.level": ("stream", "level", float),
    "stream.levels": ("stream", "levels", _parse_float_list),
    "stream.segment": ("stream", "segment", int),
    "stream.start": ("stream", "start", float),
    "stream.end": ("stream", "end", float),
    "stream.stages": ("stream", "stages", int),
    "stream.walk_scale": ("stream", "walk_scale", float),
    "stream.noise": ("stream", "noise", str),
    "stream.noise_scale": ("stream", "noise_scale", float),
    "stream.path": ("stream", "path", str),
    "stream.raps_lambda": ("stream", "raps_lambda", float),
    "stream.raps_kreg": ("stream", "raps_kreg", int),
    "out.trace": (None, "out_trace", str),
    "out.report": (None, "out_report", str),
}

_DEFAULTS = RunConfig()


def parse_config(text: str) -> RunConfig:
    """Parse a configuration document; unknown keys and bad values are rejected."""
    top: dict[str, object] = {}
    method: dict[str, object] = {}
    stream: dict[str, object] = {}
    sections = {None: top, "method": method, "stream": stream}
    seen: set[str] = set()
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        seen.add(key)
        section, attribute, parser = _KEYS[key]
        try:
            sections[section][attribute] = parser(value)  # type: ignore[operator]
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"line {line_no}: bad value for {key!r}: {exc}") from None
    config = RunConfig(
        method=MethodConfig(**method),
        stream=StreamConfig(**stream),
        **top,
    )
    return config


def serialize_config(config: RunConfig) -> str:
    """Render a configuration as the flat key-value document, defaults omitted."""
    lines: list[str] = []
    for key, (section, attribute, _) in _KEYS.items():
        if section is None:
            value = getattr(config, attribute)
            default = getattr(_DEFAULTS, attribute)
        elif section == "method":
            value = getattr(config.method, attribute)
            default = getattr(_DEFAULTS.method, attribute)
        else:
            value = getattr(config.stream, attribute)
            default = getattr(_DEFAULTS.stream, attribute)
        if value is None or value == default:
            continue
        lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as handle:
        return parse_config(handle.read())


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def validate_config(config: RunConfig) -> None:
    """Reject configurations that cannot drive a run."""
    _require(0.0 < config.alpha < 1.0, f"alpha must lie in (0, 1), got {config.alpha!r}")
    if isinstance(config.d, str):
        _require(config.d == "auto", f"d must be a number or 'auto', got {config.d!r}")
        _require(
            config.calibration_prefix is not None and config.calibration_prefix >= 1,
            "calibration_prefix >= 1 is required when d = auto",
        )
    else:
        _require(
            math.isfinite(config.d) and config.d > 0.0,
            f"d must be finite and strictly positive, got {config.d!r}",
        )
    _require(config.seed >= 0, "seed must be a non-negative integer")
    _require(len(config.windows) >= 1, "at least one metric window is required")
    _require(all(k >= 1 for k in config.windows), "metric windows must be positive integers")

    method = config.method
    _require(method.name in METHOD_NAMES, f"unknown method {method.name!r}; expected one of {METHOD_NAMES}")
    if method.eta is not None:
        _require(method.eta > 0.0, "method.eta must be strictly positive")
    _require(method.lifetime_multiplier >= 1, "method.g must be >= 1")

    stream = config.stream
    _require(stream.kind in STREAM_KINDS, f"unknown stream kind {stream.kind!r}; expected one of {STREAM_KINDS}")
    _require(stream.horizon >= 1, "stream.t must be >= 1")
    if stream.kind == "constant":
        _require(stream.level is not None, "stream.level is required for constant streams")
    elif stream.kind == "sudden_shift":
        _require(
            stream.levels is not None and len(stream.levels) >= 2,
            "stream.levels with at least two entries is required for sudden_shift streams",
        )
        _require(stream.segment is not None and stream.segment >= 1, "stream.segment >= 1 is required")
    elif stream.kind == "gradual_shift":
        _require(stream.start is not None and stream.end is not None, "stream.start and stream.end are required")
        _require(stream.stages is not None and stream.stages >= 2, "stream.stages >= 2 is required")
        _require(stream.segment is not None and stream.segment >= 1, "stream.segment >= 1 is required")
    elif stream.kind == "random_walk":
        _require(stream.start is not None, "stream.start is required for random_walk streams")
        _require(
            stream.walk_scale is not None and stream.walk_scale >= 0.0,
            "stream.walk_scale >= 0 is required for random_walk streams",
        )
    elif stream.kind == "from_file":
        _require(stream.path is not None, "stream.path is required for from_file streams")
    _require(stream.noise in ("none", "gaussian", "uniform"), f"unknown noise {stream.noise!r}")
    _require(stream.noise_scale >= 0.0, "stream.noise_scale must be non-negative")


def stream_fingerprint(config: RunConfig) -> str:
    """Hash identifying the stream a run draws: stream section plus seed, alpha, and d."""
    parts = [f"alpha={config.alpha!r}", f"d={config.d!r}", f"seed={config.seed}"]
    if config.calibration_prefix is not None:
        parts.append(f"calibration_prefix={config.calibration_prefix}")
    for f in fields(StreamConfig):
        parts.append(f"stream.{f.name}={getattr(config.stream, f.name)!r}")
    digest = hashlib.sha256("\n".join(parts).encode("utf-8")).hexdigest()
    return digest[:16]


def with_overrides(
    config: RunConfig,
    seed: int | None = None,
    windows: tuple[int, ...] | None = None,
) -> RunConfig:
    """Apply command-line overrides on top of a parsed configuration."""
    if seed is not None:
        config = replace(config, seed=seed)
    if windows:
        config = replace(config, windows=tuple(windows))
    return config
