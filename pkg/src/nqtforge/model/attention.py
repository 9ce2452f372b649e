"""Decoder-side cross-attention: MA, MSA and MHA.

Every variant maps ``q [B, T, d]`` against encoder ``k, v [B, M, d]`` and
returns the context ``[B, T, d]`` together with the attention weights.
The optional ``mask`` is a boolean ``[B, M]`` marking real source tokens.
"""
from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..tensor import Parameter
from .layers import AddNorm, Module, glorot

ATTENTION_KINDS = ("MA", "MSA", "MHA")


def _key_mask(mask, ndim):
    if mask is None:
        return None
    mask = np.asarray(mask, dtype=bool)
    # broadcast [B, M] against scores [B, (h,) T, M]
    return mask.reshape(mask.shape[:1] + (1,) * (ndim - 2) + mask.shape[1:])


def attend_ma(q, k, v, w_q, w_k, w_v, mask=None):
    Q, K, V = T.matmul(q, w_q), T.matmul(k, w_k), T.matmul(v, w_v)
    scores = T.matmul(Q, K.swapaxes(-1, -2))
    a = T.softmax(scores, axis=-1, mask=_key_mask(mask, scores.ndim))
    return T.matmul(a, V), a


def attend_msa(q, g, k, v, w_q, w_k, w_v, mask=None, norm_mode="layer_norm", gain=None, bias=None):
    return attend_ma(T.add_norm(q, g, norm_mode, gain, bias), k, v, w_q, w_k, w_v, mask)


def attend_mha(q, k, v, w_q, w_k, w_v, head_q, head_k, head_v, mask=None, scale=True):
    """Multi-head cross-attention; ``head_*`` are ``[h, d, d/h]`` projections."""
    h, d, dh = head_q.shape
    if d != h * dh:
        raise ValueError(f"d_model {d} not divisible by {h} heads")
    Q, K, V = (T.matmul(x, w) for x, w in ((q, w_q), (k, w_k), (v, w_v)))
    # [B, 1, T, d] @ [h, d, dh] -> [B, h, T, dh]
    Qh = T.matmul(Q.reshape(Q.shape[0], 1, *Q.shape[1:]), head_q)
    Kh = T.matmul(K.reshape(K.shape[0], 1, *K.shape[1:]), head_k)
    Vh = T.matmul(V.reshape(V.shape[0], 1, *V.shape[1:]), head_v)
    scores = T.matmul(Qh, Kh.swapaxes(-1, -2))
    if scale:
        scores = scores * (1.0 / np.sqrt(dh))
    a = T.softmax(scores, axis=-1, mask=_key_mask(mask, scores.ndim))
    ctx = T.matmul(a, Vh)  # [B, h, T, dh]
    B, _, steps, _ = ctx.shape
    return ctx.swapaxes(1, 2).reshape(B, steps, d), a


class CrossAttention(Module):
    """One attention block of a decoder layer, selected by ``kind``."""

    def __init__(self, kind, d, rng, name, heads=1, scale=True):
        if kind not in ATTENTION_KINDS:
            raise ValueError(f"unknown attention kind {kind!r}; expected one of {ATTENTION_KINDS}")
        if d % heads:
            raise ValueError(f"d_model {d} not divisible by {heads} heads")
        self.kind = kind
        self.heads = heads
        self.scale = scale
        self.w_q = Parameter(glorot(rng, (d, d)), f"{name}.wq")
        self.w_k = Parameter(glorot(rng, (d, d)), f"{name}.wk")
        self.w_v = Parameter(glorot(rng, (d, d)), f"{name}.wv")
        self.query_norm = AddNorm(d, f"{name}.gnorm") if kind == "MSA" else None
        if kind == "MHA":
            dh = d // heads
            self.head_q = Parameter(glorot(rng, (heads, d, dh)), f"{name}.hq")
            self.head_k = Parameter(glorot(rng, (heads, d, dh)), f"{name}.hk")
            self.head_v = Parameter(glorot(rng, (heads, d, dh)), f"{name}.hv")
        self.last_weights = None

    def __call__(self, q, k, v, g=None, mask=None):
        if self.kind == "MA":
            ctx, a = attend_ma(q, k, v, self.w_q, self.w_k, self.w_v, mask)
        elif self.kind == "MSA":
            if g is None:
                raise ValueError("MSA needs the decoder embedding g")
            n = self.query_norm
            ctx, a = attend_msa(q, g, k, v, self.w_q, self.w_k, self.w_v, mask, n.mode, n.gain, n.bias)
        else:
            ctx, a = attend_mha(q, k, v, self.w_q, self.w_k, self.w_v,
                                self.head_q, self.head_k, self.head_v, mask, self.scale)
        self.last_weights = a.data
        return ctx
