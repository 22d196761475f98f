"""Pipeline configuration: dotted-key text files, env overrides, presets.

A config file is plain text, one ``group.key = value`` per line, ``#``
comments allowed. Values are JSON where it matters (numbers, booleans,
lists); bare words are strings. Every key can also be overridden through the
environment as ``CAMOSEG_<GROUP>_<KEY>`` (for example
``CAMOSEG_DETECT_THRESHOLD=0.12``) or on the command line with
``-o group.key=value``.

Ablation presets shipped under ``camoseg.presets`` toggle the same keys, so
each ablation row is a runnable artifact rather than a code branch.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any

from .errors import ConfigError

ENV_PREFIX = "CAMOSEG_"

MOTION_MODES = ("auto", "flow", "none")
TRACK_MODES = ("none", "forward", "bidirectional")
PROMPT_MODES = ("box_only", "box_plus_point")
NORMALIZE_SCOPES = ("frame", "video")
AGG_MODES = ("frame_then_video", "frame_pooled", "pixel_pooled")


@dataclass(frozen=True)
class CameraConfig:
    theta_cam_frac: float = 0.02
    max_points: int = 200
    min_distance: float = 7.0
    ransac_seed: int = 7
    ransac_iters: int = 100
    ransac_thresh: float = 2.0


@dataclass(frozen=True)
class CuesConfig:
    motion: str = "auto"  # auto | flow | none
    mean_subtract: bool = True
    use_momentum: bool = True
    momentum: float = 0.9
    highlight_color: tuple = (0, 0, 255)
    normalize_scope: str = "frame"  # frame | video


@dataclass(frozen=True)
class BgsConfig:
    k: int = 5
    alpha: float = 0.01
    var_floor: float = 4.0
    init_var: float = 15.0


@dataclass(frozen=True)
class DetectConfig:
    threshold: float = 0.07
    sweep: tuple = (0.03, 0.05, 0.07, 0.09, 0.11, 0.13)
    prompt_variant: str = "default"
    positive: str = ""
    negatives: tuple = ()


@dataclass(frozen=True)
class TrackConfig:
    mode: str = "bidirectional"  # none | forward | bidirectional
    prompt_mode: str = "box_plus_point"


@dataclass(frozen=True)
class MetricsConfig:
    agg_mode: str = "frame_then_video"
    omit_last_frame: bool = False
    bin_threshold: float = 0.5
    dsr_tau: float = 0.5


@dataclass(frozen=True)
class ProvidersConfig:
    flow: str = "mock:"
    detector: str = "mock:"
    segmenter: str = "mock:"
    timeout: float = 30.0
    max_retries: int = 2


@dataclass(frozen=True)
class SynthConfig:
    miss_rate: float = 0.0
    jitter: float = 0.0
    score: float = 0.5
    drift: float = 0.0
    flow_sigma: float = 0.0
    distractor_score: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class IoConfig:
    imgs_subdir: str = "Imgs"
    gt_subdir: str = "GT"
    gt_stride: int = 5


@dataclass(frozen=True)
class RunnerConfig:
    workers: int = 1


_GROUPS = {
    "camera": CameraConfig,
    "cues": CuesConfig,
    "bgs": BgsConfig,
    "detect": DetectConfig,
    "track": TrackConfig,
    "metrics": MetricsConfig,
    "providers": ProvidersConfig,
    "synth": SynthConfig,
    "io": IoConfig,
    "run": RunnerConfig,
}


@dataclass(frozen=True)
class PipelineConfig:
    camera: CameraConfig = field(default_factory=CameraConfig)
    cues: CuesConfig = field(default_factory=CuesConfig)
    bgs: BgsConfig = field(default_factory=BgsConfig)
    detect: DetectConfig = field(default_factory=DetectConfig)
    track: TrackConfig = field(default_factory=TrackConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    providers: ProvidersConfig = field(default_factory=ProvidersConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    io: IoConfig = field(default_factory=IoConfig)
    run: RunnerConfig = field(default_factory=RunnerConfig)

    def snapshot(self) -> dict[str, Any]:
        """Flat dotted-key view of every setting, sorted for reproducibility."""
        flat: dict[str, Any] = {}
        for group in _GROUPS:
            sub = getattr(self, group)
            for f in fields(sub):
                value = getattr(sub, f.name)
                flat[f"{group}.{f.name}"] = list(value) if isinstance(value, tuple) else value
        return dict(sorted(flat.items()))

    def with_overrides(self, overrides: dict[str, Any]) -> "PipelineConfig":
        cfg = self
        for key, value in overrides.items():
            cfg = _set_key(cfg, key, value)
        return cfg

    def validated(self) -> "PipelineConfig":
        c = self
        def _enum(value: str, allowed: tuple, key: str) -> None:
            if value not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}, got {value!r}")

        _enum(c.cues.motion, MOTION_MODES, "cues.motion")
        _enum(c.cues.normalize_scope, NORMALIZE_SCOPES, "cues.normalize_scope")
        _enum(c.track.mode, TRACK_MODES, "track.mode")
        _enum(c.track.prompt_mode, PROMPT_MODES, "track.prompt_mode")
        _enum(c.metrics.agg_mode, AGG_MODES, "metrics.agg_mode")
        if not 0.0 <= c.cues.momentum < 1.0:
            raise ConfigError(f"cues.momentum must be in [0, 1), got {c.cues.momentum}")
        if not 0.0 < c.detect.threshold < 1.0:
            raise ConfigError(f"detect.threshold must be in (0, 1), got {c.detect.threshold}")
        if not c.detect.sweep:
            raise ConfigError("detect.sweep must be non-empty")
        if any(not 0.0 < t < 1.0 for t in c.detect.sweep):
            raise ConfigError(f"detect.sweep thresholds must be in (0, 1): {c.detect.sweep}")
        if len(c.cues.highlight_color) != 3 or any(
            not 0 <= int(v) <= 255 for v in c.cues.highlight_color
        ):
            raise ConfigError(f"cues.highlight_color must be an RGB triple: {c.cues.highlight_color}")
        if not 0.0 < c.metrics.bin_threshold < 1.0:
            raise ConfigError("metrics.bin_threshold must be in (0, 1)")
        if not 0.0 < c.metrics.dsr_tau <= 1.0:
            raise ConfigError("metrics.dsr_tau must be in (0, 1]")
        if c.run.workers < 1:
            raise ConfigError("run.workers must be >= 1")
        if c.bgs.k < 1 or not 0.0 < c.bgs.alpha <= 1.0 or c.bgs.init_var < c.bgs.var_floor:
            raise ConfigError("invalid bgs settings")
        if c.providers.timeout <= 0 or c.providers.max_retries < 0:
            raise ConfigError("invalid provider endpoint settings")
        return c


def _coerce(key: str, value: Any, default: Any) -> Any:
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("true", "false"):
                return value.lower() == "true"
            raise ValueError("expected a boolean")
        if isinstance(default, int) and not isinstance(default, bool):
            if isinstance(value, bool):
                raise ValueError("expected an integer")
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise ValueError("expected a number")
            return float(value)
        if isinstance(default, tuple):
            if isinstance(value, (list, tuple)):
                return tuple(value)
            raise ValueError("expected a list")
        if isinstance(default, str):
            return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc
    return value


def _set_key(cfg: PipelineConfig, key: str, value: Any) -> PipelineConfig:
    if "." not in key:
        raise ConfigError(f"config keys are dotted, got {key!r}")
    group, _, name = key.partition(".")
    if group not in _GROUPS:
        raise ConfigError(f"unknown config group {group!r} in {key!r}")
    sub = getattr(cfg, group)
    if name not in {f.name for f in fields(sub)}:
        raise ConfigError(f"unknown config key {key!r}")
    coerced = _coerce(key, value, getattr(sub, name))
    return replace(cfg, **{group: replace(sub, **{name: coerced})})


def parse_value(text: str) -> Any:
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config_text(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    cfg = base or PipelineConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        cfg = _set_key(cfg, key.strip(), parse_value(value))
    return cfg


def load_config_file(path: str | Path, base: PipelineConfig | None = None) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), base=base)


def apply_env_overrides(
    cfg: PipelineConfig, environ: dict[str, str] | None = None
) -> PipelineConfig:
    env = os.environ if environ is None else environ
    for key in cfg.snapshot():
        env_name = ENV_PREFIX + key.upper().replace(".", "_")
        if env_name in env:
            cfg = _set_key(cfg, key, parse_value(env[env_name]))
    return cfg


def list_presets() -> list[str]:
    files = resources.files("camoseg.presets")
    return sorted(p.name[: -len(".cfg")] for p in files.iterdir() if p.name.endswith(".cfg"))


def load_preset(name: str, base: PipelineConfig | None = None) -> PipelineConfig:
    files = resources.files("camoseg.presets")
    candidate = files / f"{name}.cfg"
    try:
        text = candidate.read_text()
    except FileNotFoundError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(list_presets())}"
        ) from None
    return parse_config_text(text, base=base)


def resolve_config(
    config_file: str | Path | None = None,
    preset: str | None = None,
    overrides: dict[str, Any] | None = None,
    use_env: bool = True,
) -> PipelineConfig:
    """Layer configuration sources: defaults < preset < file < env < overrides."""
    cfg = PipelineConfig()
    if preset:
        cfg = load_preset(preset, base=cfg)
    if config_file:
        cfg = load_config_file(config_file, base=cfg)
    if use_env:
        cfg = apply_env_overrides(cfg)
    if overrides:
        cfg = cfg.with_overrides(overrides)
    return cfg.validated()
