"""Training configuration: presets, the key = value file format and ablation variants."""

import dataclasses
import logging
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Type, TypeVar, Union

from dotenv import dotenv_values

from .errors import CompatibilityError, ConfigurationError

logger = logging.getLogger(__name__)

LOG_LEVEL = os.getenv("PLRN_LOG_LEVEL", "INFO").upper()

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


@dataclass
class TrainConfig:
    """Model and optimization settings; defaults are the desk-scale preset."""

    d: int = 64
    T: int = 32
    seg_len: int = 8
    max_words: int = 25
    lr: float = 0.0004
    batch_size: int = 16
    epochs: int = 60
    patience: int = 0
    seed: int = 1
    kernel_width: int = 15
    nl_blocks: int = 2
    nl_heads: int = 4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    use_qan: bool = True
    use_l_tem: bool = True
    use_l_cw: bool = True
    use_lcn: bool = True
    use_gcn: bool = True
    pos_embed_video: bool = True
    pos_embed_word: bool = True

    def __post_init__(self):
        self.validate()

    @property
    def hop(self) -> int:
        return self.seg_len // 2

    def validate(self) -> None:
        if self.d <= 0 or self.d % 2:
            raise ConfigurationError(f"d must be a positive even number, got {self.d}")
        if self.T < 1:
            raise ConfigurationError(f"T must be at least 1, got {self.T}")
        if self.seg_len < 2 or self.seg_len % 2:
            raise ConfigurationError(f"seg_len must be even, got {self.seg_len}")
        if self.kernel_width < 1 or self.kernel_width % 2 == 0:
            raise ConfigurationError(f"kernel_width must be odd, got {self.kernel_width}")
        if self.nl_heads < 1 or self.d % self.nl_heads:
            raise ConfigurationError(f"d={self.d} is not divisible by nl_heads={self.nl_heads}")
        if self.nl_blocks < 0:
            raise ConfigurationError(f"nl_blocks must be >= 0, got {self.nl_blocks}")
        if self.batch_size < 1 or self.epochs < 0 or self.max_words < 1:
            raise ConfigurationError("batch_size and max_words must be >= 1 and epochs >= 0")
        if self.lr < 0:
            raise ConfigurationError(f"lr must be >= 0, got {self.lr}")

    def replace(self, **changes: Any) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def as_numbers(self) -> Dict[str, float]:
        """Flatten to floats for storage beside checkpoint parameters."""
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_numbers(cls, values: Mapping[str, float]) -> "TrainConfig":
        """Inverse of as_numbers; unknown keys are ignored, missing ones keep their defaults."""
        types = {f.name: f.type for f in fields(cls)}
        settings: Dict[str, Any] = {}
        for name, value in values.items():
            kind = types.get(name)
            if kind in (bool, "bool"):
                settings[name] = bool(value)
            elif kind in (int, "int"):
                settings[name] = int(value)
            elif kind is not None:
                settings[name] = float(value)
        return cls(**settings)

    def check_matches(self, stored: Mapping[str, float]) -> None:
        """Raise CompatibilityError naming the first architecture field that differs."""
        for name in ARCHITECTURE_FIELDS:
            if name in stored and float(getattr(self, name)) != stored[name]:
                raise CompatibilityError(name, getattr(self, name), stored[name])


ARCHITECTURE_FIELDS = ("d", "T", "seg_len", "max_words", "kernel_width", "nl_blocks", "nl_heads",
                       "use_qan", "use_lcn", "use_gcn", "pos_embed_video", "pos_embed_word")

PRESETS: Dict[str, Dict[str, Any]] = {
    "full": dict(d=512, T=128, seg_len=16, max_words=25, lr=0.0004, batch_size=100),
    "desk": dict(d=64, T=32, seg_len=8, max_words=25, lr=0.0004, batch_size=16),
    "tiny": dict(d=8, T=6, seg_len=4, max_words=25, kernel_width=3, nl_blocks=1, nl_heads=2, batch_size=1),
}

ABLATIONS: Dict[str, Dict[str, bool]] = {
    "full": {},
    "baseline": dict(use_qan=False, use_l_tem=False, use_l_cw=False, use_lcn=False, use_gcn=False),
    "wo_qan": dict(use_qan=False),
    "wo_l_tem": dict(use_l_tem=False),
    "wo_l_cw": dict(use_l_cw=False),
    "wo_lcn": dict(use_lcn=False),
    "wo_gcn": dict(use_gcn=False),
    "wo_pos_video": dict(pos_embed_video=False),
    "wo_pos_word": dict(pos_embed_word=False),
    "wo_pos_both": dict(pos_embed_video=False, pos_embed_word=False),
}

C = TypeVar("C")


def coerce(cls: Type[C], key: str, raw: Any) -> Any:
    """Convert a raw string to the type of dataclass field ``key``."""
    types = {f.name: f.type for f in fields(cls)}  # type: ignore[arg-type]
    if key not in types:
        raise ConfigurationError(f"unknown configuration key '{key}'")
    kind = types[key]
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if kind in (bool, "bool"):
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        if kind in (int, "int"):
            return int(text)
        if kind in (float, "float"):
            return float(text)
        if kind in (str, "str"):
            return text
    except ValueError:
        raise ConfigurationError(f"invalid value '{raw}' for configuration key '{key}'") from None
    return text


def parse_overrides(pairs: Iterable[str]) -> Dict[str, str]:
    """Parse ``key=value`` strings from the command line."""
    result: Dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"override '{pair}' is not of the form key=value")
        result[key.strip()] = value.strip()
    return result


def read_key_values(path: Union[str, Path]) -> Dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    values = dotenv_values(path)
    return {k: (v if v is not None else "") for k, v in values.items()}


def load_config(source: Optional[Union[str, Path]] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> TrainConfig:
    """Build a TrainConfig from a preset name or config file plus overrides.

    Args:
        source: A preset name ('full', 'desk', 'tiny'), a config file path, or None for desk
        overrides: Values taking precedence over the file

    Returns:
        Validated TrainConfig
    """
    values: Dict[str, Any] = {}
    if source is not None and str(source) in PRESETS:
        values["preset"] = str(source)
    elif source is not None:
        values.update(read_key_values(source))
    values.update(overrides or {})

    preset = str(values.pop("preset", "desk")).strip()
    if preset not in PRESETS:
        raise ConfigurationError(f"unknown preset '{preset}'. Supported presets: {', '.join(PRESETS)}")
    settings: Dict[str, Any] = dict(PRESETS[preset])
    for key, raw in values.items():
        settings[key] = coerce(TrainConfig, key, raw)
    config = TrainConfig(**settings)
    logger.debug(f"Loaded configuration (preset {preset}): {config}")
    return config


def dump_config(config: Any, path: Union[str, Path]) -> None:
    """Write any config dataclass as ``key = value`` lines."""
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def ablation_config(base: TrainConfig, variant: str) -> TrainConfig:
    if variant not in ABLATIONS:
        raise ConfigurationError(f"unknown ablation variant '{variant}'. Supported: {', '.join(ABLATIONS)}")
    return base.replace(**ABLATIONS[variant])
