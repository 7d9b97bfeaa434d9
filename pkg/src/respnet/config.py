"""Run configuration: named profiles, config files and flag overrides.

Config files are TOML (or JSON with the same structure)::

    profile = "desk"
    seed = 3

    [generate]
    rate_hz = 10.0
    window_s = 60.0
    noise_sigma = 0.03

    [model]
    hidden = 32
    attention = 8

    [train]
    batch_size = 32
    lr = 0.005

    [templates.tachypnea]
    noise_sigma = 0.05
    [[templates.tachypnea.rules]]
    kind = "breathing"
    a = [0.4, 1.0]
    bpm = [21, 35]
    breaths = [3, 6]

Resolution order is profile defaults, then the file, then command-line flags.
The resolved configuration serializes to JSON and loads back unchanged, so a
run's sidecar file replays it.
"""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .nn.model import ModelDims
from .rsm import (
    PatternTemplate,
    RepeatPolicy,
    RespiratoryPattern,
    SegmentRule,
    default_templates,
    reference_test_mix,
)
from .signal import PreprocessConfig
from .train import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GenerateConfig:
    rate_hz: float = 10.0
    window_s: float = 60.0
    noise_sigma: float = 0.03
    train_per_class: int = 500
    test_counts: tuple[int, ...] = tuple(reference_test_mix().values())


@dataclass(frozen=True)
class ModelConfig:
    hidden: int = 32
    attention: int = 8
    carry_bias: float = 2.0
    input_shift: float = 0.5
    input_scale: float = 20.0

    @property
    def dims(self) -> ModelDims:
        return ModelDims(input_dim=1, hidden=self.hidden, attention=self.attention)


@dataclass(frozen=True)
class RunConfig:
    profile: str = "desk"
    seed: int = 0
    val_frac: float = 0.1
    generate: GenerateConfig = GenerateConfig()
    preprocess: PreprocessConfig = PreprocessConfig()
    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    templates: Mapping[str, dict] = field(default_factory=dict)

    def pattern_templates(self) -> dict[RespiratoryPattern, PatternTemplate]:
        base = default_templates(
            sample_rate_hz=self.generate.rate_hz,
            window_seconds=self.generate.window_s,
            noise_sigma=self.generate.noise_sigma,
        )
        for key, override in self.templates.items():
            p = RespiratoryPattern.parse(key)
            base[p] = apply_template_override(base[p], override)
        return base

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["templates"] = copy.deepcopy(dict(self.templates))
        d["generate"]["test_counts"] = list(self.generate.test_counts)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


PROFILES: dict[str, dict[str, Any]] = {
    # desk: comparison sized for one laptop CPU
    "desk": {
        "train": {"batch_size": 32, "epochs": 15, "lr": 5e-3, "lr_schedule": "cosine"},
    },
    # full: 20,000 windows per class and the larger network
    "full": {
        "generate": {"train_per_class": 20000},
        "model": {"hidden": 128, "attention": 16},
        "train": {"batch_size": 128, "epochs": 15, "lr": 1e-3, "lr_schedule": "constant"},
    },
    "smoke": {
        "generate": {"train_per_class": 10, "test_counts": [5] * 6},
        "model": {"hidden": 8, "attention": 4},
        "train": {"batch_size": 16, "epochs": 2, "lr": 5e-3, "lr_schedule": "cosine"},
    },
}


def _update(obj, values: Mapping[str, Any], where: str):
    names = {f.name for f in fields(obj)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")
    values = dict(values)
    if "test_counts" in values:
        values["test_counts"] = tuple(int(v) for v in values["test_counts"])
    try:
        return replace(obj, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{where}] settings: {exc}") from exc


def merge(cfg: RunConfig, data: Mapping[str, Any]) -> RunConfig:
    """Apply a (possibly partial) nested mapping on top of ``cfg``."""
    top = {}
    sections = {"generate", "preprocess", "model", "train"}
    for key, value in data.items():
        if key in sections:
            if not isinstance(value, Mapping):
                raise ConfigError(f"[{key}] must be a table")
            top[key] = _update(getattr(cfg, key), value, key)
        elif key == "templates":
            merged = copy.deepcopy(dict(cfg.templates))
            for name, override in value.items():
                RespiratoryPattern.parse(name)
                merged[name] = {**merged.get(name, {}), **override}
            top[key] = merged
        elif key in ("profile", "seed", "val_frac"):
            top[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    cfg = replace(cfg, **top)
    if not 0 <= cfg.val_frac < 1:
        raise ConfigError(f"val_frac must be in [0, 1), got {cfg.val_frac}")
    cfg.pattern_templates()  # validate overrides eagerly
    return cfg


def profile_config(name: str) -> RunConfig:
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    return merge(RunConfig(profile=name), PROFILES[name])


def load_config_file(path) -> dict[str, Any]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return json.loads(text)
    import tomli

    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def resolve(path=None, profile: str | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Profile, then config file, then flag overrides (a nested mapping)."""
    data = load_config_file(path) if path else {}
    name = profile or data.get("profile", "desk")
    cfg = profile_config(name)
    # "run" holds sidecar metadata (paths, command), not settings
    cfg = merge(cfg, {k: v for k, v in data.items() if k not in ("profile", "run")})
    if overrides:
        cfg = merge(cfg, overrides)
    return cfg


def apply_template_override(template: PatternTemplate, override: Mapping[str, Any]) -> PatternTemplate:
    changes: dict[str, Any] = {}
    for key, value in override.items():
        if key == "noise_sigma":
            changes[key] = float(value)
        elif key == "rules":
            try:
                changes["segment_rules"] = tuple(SegmentRule(**dict(r)) for r in value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{template.pattern.display_name}: bad rule ({exc})") from exc
        elif key == "repeat":
            changes["repeat"] = RepeatPolicy(**dict(value))
        else:
            raise ConfigError(f"unknown template key {key!r}")
    try:
        return replace(template, **changes)
    except ValueError as exc:
        raise ConfigError(f"{template.pattern.display_name}: {exc}") from exc


def write_sidecar(cfg: RunConfig, path, extra: Mapping[str, Any] | None = None) -> Path:
    from .data import atomic_write

    path = Path(path)
    with atomic_write(path) as fh:
        payload = cfg.to_dict()
        if extra:
            payload["run"] = dict(extra)
        fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
