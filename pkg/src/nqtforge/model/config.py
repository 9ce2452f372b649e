from __future__ import annotations

from dataclasses import asdict, dataclass

from .attention import ATTENTION_KINDS
from .encoders import ENCODER_KINDS


@dataclass(frozen=True)
class ModelConfig:
    encoder_kind: str = "MHC"
    attention_kind: str = "MHA"
    n_layers: int = 2
    d_model: int = 64
    heads: int = 4
    kernel: int = 3
    max_target_len: int = 48
    scale_scores: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.encoder_kind not in ENCODER_KINDS:
            raise ValueError(f"encoder_kind must be one of {ENCODER_KINDS}, got {self.encoder_kind!r}")
        if self.attention_kind not in ATTENTION_KINDS:
            raise ValueError(f"attention_kind must be one of {ATTENTION_KINDS}, got {self.attention_kind!r}")
        if self.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.heads < 1 or self.d_model % self.heads:
            raise ValueError(f"d_model {self.d_model} is not divisible by heads {self.heads}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"kernel must be a positive odd integer, got {self.kernel}")
        if self.max_target_len < 1:
            raise ValueError(f"max_target_len must be >= 1, got {self.max_target_len}")

    def to_dict(self):
        return asdict(self)
