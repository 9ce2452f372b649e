"""Flat ``key = value`` pipeline configuration."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .model.config import ModelConfig
from .nqt import SEPARATOR_STYLES

DATASET_FORMATS = ("synthetic", "lcquad", "qald", "norm")


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    run_dir: str = "run"
    dataset_format: str = "synthetic"
    dataset: str = ""
    dataset_test: str = ""
    synthetic_n: int = 600
    synthetic_test: int = 100
    synthetic_seed: int = 7
    store: str = ""
    endpoint: str = ""
    timeout: float = 10.0
    embeddings: str = ""
    lexicon: str = ""
    catalog: str = ""
    encoder: str = "MHC"
    attention: str = "MHA"
    n_layers: int = 2
    d_model: int = 64
    heads: int = 4
    kernel: int = 3
    max_target_len: int = 48
    scale_scores: bool = True
    dropout: float = 0.0
    learning_rate: float = 3e-3
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0
    separator: str = "sep"
    correction: bool = True
    audit: bool = False
    inject_gold: bool = False

    def __post_init__(self):
        if self.dataset_format not in DATASET_FORMATS:
            raise ConfigError(f"dataset_format must be one of {DATASET_FORMATS}, got {self.dataset_format!r}")
        if self.separator not in SEPARATOR_STYLES:
            raise ConfigError(f"separator must be one of {tuple(SEPARATOR_STYLES)}, got {self.separator!r}")
        if self.dataset_format in ("lcquad", "qald", "norm") and not self.dataset:
            raise ConfigError(f"dataset_format={self.dataset_format} needs dataset=<path>")
        if self.synthetic_n < 1 or not 0 <= self.synthetic_test <= self.synthetic_n:
            raise ConfigError("synthetic_test must lie in [0, synthetic_n] and synthetic_n >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        try:
            self.model_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def model_config(self):
        return ModelConfig(self.encoder, self.attention, self.n_layers, self.d_model, self.heads,
                           self.kernel, self.max_target_len, self.scale_scores, self.seed)

    def translator_params(self):
        return dict(encoder=self.encoder, attention=self.attention, n_layers=self.n_layers,
                    d_model=self.d_model, heads=self.heads, kernel=self.kernel,
                    max_target_len=self.max_target_len, scale_scores=self.scale_scores,
                    dropout=self.dropout, learning_rate=self.learning_rate, batch_size=self.batch_size,
                    epochs=self.epochs, separator=self.separator, seed=self.seed,
                    pretrained=self.embeddings or None)

    @property
    def run_path(self):
        return Path(self.run_dir)

    def replace(self, **changes):
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def dumps(self):
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))

    @classmethod
    def loads(cls, text, base=None):
        """Parse ``key = value`` lines; ``#`` starts a comment.

        Relative paths are resolved against ``base`` when given.
        """
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            values[key] = _coerce(key, value, types[key], lineno)
        if base is not None:
            for key in ("run_dir", "dataset", "dataset_test", "store", "embeddings", "lexicon", "catalog"):
                if values.get(key) and not Path(values[key]).is_absolute():
                    values[key] = str(Path(base) / values[key])
        return cls(**values)

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.loads(text, base=path.parent)


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _coerce(key, value, typ, lineno):
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "bool":
            low = value.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return low in ("true", "1", "yes")
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} expects {typ}, got {value!r}") from None
    return value
