"""The four question encoders.  Each returns an :class:`EncoderOutput`."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..tensor import Tensor
from .layers import LSTM, AddNorm, BiLSTM, ConvGLU, FeedForward, Module, SelfAttention

ENCODER_KINDS = ("BiLSTM", "ConvS2S", "Transformer", "MHC")


@dataclass
class EncoderOutput:
    k: Tensor
    v: Tensor

    def __post_init__(self):
        if self.k.shape != self.v.shape:
            raise ValueError(f"encoder k {self.k.shape} and v {self.v.shape} differ")


def _zero_pads(x, mask):
    return x if mask is None else x * Tensor(np.asarray(mask, dtype=np.float64)[..., None])


class BiLSTMEncoder(Module):
    def __init__(self, d, n_layers, rng, name="enc"):
        self.first = BiLSTM(d, rng, f"{name}.0")
        self.rest = [LSTM(d, d, rng, f"{name}.{i}") for i in range(1, n_layers)]
        self.norms = [AddNorm(d, f"{name}.{i}.norm") for i in range(n_layers)]

    def __call__(self, x, mask=None):
        h = self.norms[0](self.first(x, mask), x)
        for lstm, norm in zip(self.rest, self.norms[1:]):
            h = norm(lstm(h, mask), h)
        return EncoderOutput(h, h)


class ConvS2SEncoder(Module):
    def __init__(self, d, n_layers, kernel, rng, name="enc"):
        self.blocks = [ConvGLU(d, kernel, rng, f"{name}.{i}") for i in range(n_layers)]

    def __call__(self, x, mask=None):
        h = x
        for block in self.blocks:
            h = _zero_pads(T.add_norm(block(h, mask), h, "scaled"), mask)
        return EncoderOutput(h, T.add_norm(h, x, "scaled"))


class TransformerEncoder(Module):
    def __init__(self, d, n_layers, heads, rng, name="enc"):
        self.attn = [SelfAttention(d, heads, rng, f"{name}.{i}.sa") for i in range(n_layers)]
        self.ffn = [FeedForward(d, rng, f"{name}.{i}.ff") for i in range(n_layers)]
        self.norm1 = [AddNorm(d, f"{name}.{i}.n1") for i in range(n_layers)]
        self.norm2 = [AddNorm(d, f"{name}.{i}.n2") for i in range(n_layers)]

    def __call__(self, x, mask=None):
        h = x
        for attn, ffn, n1, n2 in zip(self.attn, self.ffn, self.norm1, self.norm2):
            h = n1(attn(h, mask), h)
            h = n2(ffn(h), h)
        return EncoderOutput(h, h)

    @property
    def attention_weights(self):
        return [a.last_weights for a in self.attn]


class MHCEncoder(Module):
    """Convolution blocks whose n-gram features are related by self-attention."""

    def __init__(self, d, n_layers, kernel, heads, rng, name="enc"):
        self.convs = [ConvGLU(d, kernel, rng, f"{name}.{i}.conv") for i in range(n_layers)]
        self.attn = [SelfAttention(d, heads, rng, f"{name}.{i}.sa") for i in range(n_layers)]
        self.norm1 = [AddNorm(d, f"{name}.{i}.n1") for i in range(n_layers)]
        self.norm2 = [AddNorm(d, f"{name}.{i}.n2") for i in range(n_layers)]

    def __call__(self, x, mask=None):
        h = x
        for conv, attn, n1, n2 in zip(self.convs, self.attn, self.norm1, self.norm2):
            h = n1(conv(h, mask), h)
            h = n2(attn(h, mask), h)
        return EncoderOutput(h, h)

    @property
    def attention_weights(self):
        return [a.last_weights for a in self.attn]


def build_encoder(kind, d, n_layers, kernel, heads, rng):
    if kind == "BiLSTM":
        return BiLSTMEncoder(d, n_layers, rng)
    if kind == "ConvS2S":
        return ConvS2SEncoder(d, n_layers, kernel, rng)
    if kind == "Transformer":
        return TransformerEncoder(d, n_layers, heads, rng)
    if kind == "MHC":
        return MHCEncoder(d, n_layers, kernel, heads, rng)
    raise ValueError(f"unknown encoder kind {kind!r}; expected one of {ENCODER_KINDS}")
