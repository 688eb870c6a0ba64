"""Flat ``key = value`` run configuration with dotted keys.

Example file::

    # comments and blank lines are ignored
    priority.target = listener
    priority.gamma = 2
    cust.max_turns = inf

``format_config`` writes the same syntax, so a printed config can be fed
back unchanged.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .errors import ConfigError


@dataclass
class DataSection:
    train: Optional[str] = None
    dev: Optional[str] = None
    test: Optional[str] = None
    labels: Optional[str] = None
    checkpoint: Optional[str] = None
    output_dir: str = "runs"


@dataclass
class CustSection:
    context: str = "past"
    max_turns: Optional[int] = 4
    speaker_tokens: bool = False


@dataclass
class EmbedSection:
    mode: str = "hash"
    dim: int = 32
    seed: int = 0
    source: Optional[str] = None


@dataclass
class ModelSection:
    layers: int = 2
    heads: int = 4
    pe: bool = False
    ffn: bool = False
    dropout: float = 0.1


@dataclass
class AttnSection:
    output_projection: bool = True
    mask: str = "all"


@dataclass
class PrioritySection:
    enabled: bool = True
    target: str = "same_speaker"
    decay: str = "normdist"
    gamma: float = 2.0
    sigma: Union[float, str] = "auto"


@dataclass
class TrainSection:
    lr: float = 3e-3
    lr_decay: float = 0.8
    patience: int = 5
    batch_size: int = 32
    max_epochs: int = 40
    seed: int = 1111
    metric: str = "weighted_f1"


@dataclass
class SynthSection:
    dialogues: int = 2000
    dev_dialogues: int = 300
    test_dialogues: int = 300
    turns_mean: float = 8.0
    turns_std: float = 3.0
    speakers: int = 2
    labels: int = 4
    cue_strength: float = 0.9
    vocab_size: int = 200
    min_words: int = 2
    max_words: int = 5
    seed: int = 0


@dataclass
class GradcheckSection:
    h: float = 1e-5
    tol: float = 1e-4
    dim: int = 16
    turns: int = 4
    labels: int = 4


@dataclass
class RunConfig:
    data: DataSection = field(default_factory=DataSection)
    cust: CustSection = field(default_factory=CustSection)
    embed: EmbedSection = field(default_factory=EmbedSection)
    model: ModelSection = field(default_factory=ModelSection)
    attn: AttnSection = field(default_factory=AttnSection)
    priority: PrioritySection = field(default_factory=PrioritySection)
    train: TrainSection = field(default_factory=TrainSection)
    synth: SynthSection = field(default_factory=SynthSection)
    gradcheck: GradcheckSection = field(default_factory=GradcheckSection)

    def get(self, key: str) -> Any:
        section, name = _split_key(key)
        return getattr(getattr(self, section), name)

    def set(self, key: str, raw: Any) -> None:
        section, name = _split_key(key)
        obj = getattr(self, section)
        setattr(obj, name, _coerce(key, _field_types(type(obj))[name], raw))

    def to_flat(self) -> dict[str, Any]:
        return {f"{s.name}.{f.name}": getattr(getattr(self, s.name), f.name)
                for s in dataclasses.fields(self) for f in dataclasses.fields(getattr(self, s.name))}


def _field_types(cls) -> dict[str, Any]:
    return typing.get_type_hints(cls)


def all_keys() -> list[str]:
    return list(RunConfig().to_flat())


def _split_key(key: str) -> tuple[str, str]:
    section, _, name = key.partition(".")
    sections = {f.name: f for f in dataclasses.fields(RunConfig)}
    if not name or section not in sections:
        raise ConfigError(f"unknown config key {key!r}")
    if name not in _field_types(sections[section].default_factory):
        raise ConfigError(f"unknown config key {key!r}")
    return section, name


_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


def _coerce(key, tp, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    args = typing.get_args(tp)
    if typing.get_origin(tp) is Union and type(None) in args:
        if text.lower() in ("none", "null", "inf", ""):
            return None
        tp = next(a for a in args if a is not type(None))
        args = typing.get_args(tp)
    try:
        if typing.get_origin(tp) is Union:  # float-or-symbol, e.g. sigma
            try:
                return float(text)
            except ValueError:
                return text
        if tp is bool:
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        if tp is int:
            return int(text)
        if tp is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key}") from None


def parse_config_text(text: str, cfg: Optional[RunConfig] = None) -> RunConfig:
    cfg = cfg or RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        cfg.set(key.strip(), value.strip())
    return cfg


def load_config(path, cfg: Optional[RunConfig] = None) -> RunConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), cfg)


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in cfg.to_flat().items())


def resolve(config_path=None, overrides: Optional[dict[str, str]] = None) -> RunConfig:
    """Defaults, then the config file, then flag overrides."""
    cfg = RunConfig()
    if config_path is not None:
        load_config(config_path, cfg)
    for key, value in (overrides or {}).items():
        cfg.set(key, value)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    from .attention import MASK_MODES
    from .cust import CONTEXT_MODES
    from .embedding import EMBED_MODES
    from .priority import PriorityConfig
    from .training import METRICS

    checks = [
        (cfg.cust.context in CONTEXT_MODES, f"cust.context must be one of {CONTEXT_MODES}"),
        (cfg.cust.max_turns is None or cfg.cust.max_turns >= 1, "cust.max_turns must be >= 1 or inf"),
        (cfg.embed.mode in EMBED_MODES, f"embed.mode must be one of {EMBED_MODES}"),
        (cfg.embed.dim >= 1, "embed.dim must be positive"),
        (cfg.model.layers >= 1 and cfg.model.heads >= 1, "model.layers and model.heads must be positive"),
        (cfg.embed.dim % cfg.model.heads == 0, "embed.dim must be divisible by model.heads"),
        (0 <= cfg.model.dropout < 1, "model.dropout must lie in [0, 1)"),
        (cfg.attn.mask in MASK_MODES, f"attn.mask must be one of {MASK_MODES}"),
        (cfg.train.lr > 0, "train.lr must be positive"),
        (0 < cfg.train.lr_decay < 1, "train.lr_decay must lie in (0, 1)"),
        (cfg.train.patience >= 1 and cfg.train.batch_size >= 1 and cfg.train.max_epochs >= 1,
         "train.patience, train.batch_size and train.max_epochs must be positive"),
        (cfg.train.metric in METRICS, f"train.metric must be one of {METRICS}"),
        (cfg.gradcheck.h > 0, "gradcheck.h must be positive"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
    p = cfg.priority
    try:
        PriorityConfig(p.target, p.decay, p.gamma, p.sigma)
    except ValueError as exc:
        raise ConfigError(f"priority: {exc}") from None
