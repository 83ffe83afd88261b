"""Experiment configuration: a JSON file plus command-line overrides."""
from __future__ import annotations

import json
import os
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .decode import TreeConfig
from .errors import ConfigError
from .vocab import parse_criterion

SOURCES = ("raw", "target", "draft")
DEFAULT_FRACTIONS = (0.02, 0.05, 0.1, 0.25, 0.5, 1.0)


@dataclass(frozen=True)
class ModelSpec:
    type: str  # "ngram" | "linear"
    order: int = 4
    alpha: float = 0.01
    d: int = 32
    m: int = 1
    fit: str = "bigram"  # linear only: "bigram" | "random"


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    corpus: tuple
    eval_prompts: tuple
    raw_calibration: tuple = ()
    calibration_prompts: tuple = ()
    vocab_size: int = 8000
    target: ModelSpec = ModelSpec("ngram", order=4, alpha=0.01)
    draft: ModelSpec = ModelSpec("linear", d=32, m=1, alpha=1.0)
    sources: tuple = SOURCES
    calibration_max_new: int = 128
    count_prompts: bool = False
    criterion: str = "topk:0.25v"
    tree: TreeConfig = TreeConfig()
    max_new: int = 64
    task: str = ""
    relative_latency: float | None = None
    gamma: str = "depth"  # "depth" | "max_tokens"
    sweep_source: str = "target"
    sweep_fractions: tuple = DEFAULT_FRACTIONS
    out_dir: str = "runs/out"

    @property
    def task_name(self) -> str:
        return self.task or Path(self.eval_prompts[0]).stem

    def gamma_value(self) -> int:
        return self.tree.max_tokens if self.gamma == "max_tokens" else self.tree.depth

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def derive_seed(seed: int, label: str) -> int:
    """Independent sub-seed for one pipeline component (Philox key material)."""
    return (int(seed) << 32) | zlib.crc32(label.encode("utf-8"))


_PATH_KEYS = ("corpus", "eval_prompts", "raw_calibration", "calibration_prompts")


def _as_paths(value, base: Path) -> tuple:
    if isinstance(value, str):
        value = [value]
    return tuple(os.path.normpath(base / v) for v in value)


def from_dict(raw: dict, base: Path = Path(".")) -> ExperimentConfig:
    raw = dict(raw)
    if "seed" not in raw:
        raise ConfigError("config must set 'seed'")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        for key in _PATH_KEYS:
            if key in raw:
                raw[key] = _as_paths(raw[key], base)
        for key in ("target", "draft"):
            if key in raw and isinstance(raw[key], dict):
                raw[key] = ModelSpec(**raw[key])
        if isinstance(raw.get("tree"), dict):
            raw["tree"] = TreeConfig(**raw["tree"])
        for key in ("sources", "sweep_fractions"):
            if key in raw:
                raw[key] = tuple(raw[key])
        if "out_dir" in raw:
            raw["out_dir"] = os.path.normpath(base / raw["out_dir"])
        cfg = ExperimentConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if not cfg.corpus:
        raise ConfigError("config needs at least one corpus path")
    if not cfg.eval_prompts:
        raise ConfigError("config needs at least one eval_prompts path")
    for key in _PATH_KEYS:
        for p in getattr(cfg, key):
            if not Path(p).is_file():
                raise ConfigError(f"{key}: no such file {p}")
    for s in cfg.sources:
        if s not in SOURCES:
            raise ConfigError(f"unknown calibration source {s!r}")
    if "raw" in cfg.sources and not cfg.raw_calibration:
        raise ConfigError("raw calibration requested but raw_calibration is empty")
    if {"target", "draft"} & set(cfg.sources) and not cfg.calibration_prompts:
        raise ConfigError("generated calibration requested but calibration_prompts is empty")
    if cfg.sweep_source not in SOURCES:
        raise ConfigError(f"unknown sweep source {cfg.sweep_source!r}")
    if cfg.gamma not in ("depth", "max_tokens"):
        raise ConfigError("gamma must be 'depth' or 'max_tokens'")
    if cfg.target.type not in ("ngram", "linear") or cfg.draft.type not in ("ngram", "linear"):
        raise ConfigError("model type must be 'ngram' or 'linear'")
    if cfg.draft.fit not in ("bigram", "random"):
        raise ConfigError("draft fit must be 'bigram' or 'random'")
    if cfg.vocab_size < 3:
        raise ConfigError("vocab_size must be >= 3")
    if cfg.max_new < 1 or cfg.calibration_max_new < 1:
        raise ConfigError("max_new values must be >= 1")
    if cfg.relative_latency is not None and cfg.relative_latency < 0:
        raise ConfigError("relative_latency must be >= 0")
    if not cfg.sweep_fractions or any(not 0 < f <= 1 for f in cfg.sweep_fractions):
        raise ConfigError("sweep_fractions must lie in (0, 1]")
    try:
        parse_criterion(cfg.criterion, V=cfg.vocab_size)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return from_dict(raw, path.parent)


def override(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Apply non-None overrides (flags win over the file)."""
    changes = {k: v for k, v in changes.items() if v is not None}
    tree = {k: changes.pop(k) for k in ("depth", "node_top_k", "max_tokens") if k in changes}
    try:
        if tree:
            changes["tree"] = replace(cfg.tree, **tree)
        new = replace(cfg, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid override: {exc}") from None
    validate(new)
    return new
