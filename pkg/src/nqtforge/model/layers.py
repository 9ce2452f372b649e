"""Parameterised building blocks shared by the encoders and the decoder."""
from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..tensor import Parameter, Tensor


class Module:
    def parameters(self):
        out = []
        for value in vars(self).values():
            out.extend(_collect(value))
        seen, unique = set(), []
        for p in out:
            if id(p) not in seen:
                seen.add(id(p))
                unique.append(p)
        return unique

    def named_parameters(self):
        return {p.name: p for p in self.parameters()}


def _collect(value):
    if isinstance(value, Parameter):
        return [value]
    if isinstance(value, Module):
        return value.parameters()
    if isinstance(value, (list, tuple)):
        return [p for item in value for p in _collect(item)]
    if hasattr(value, "parameters") and callable(value.parameters):
        return list(value.parameters())
    return []


def glorot(rng, shape):
    fan_in, fan_out = shape[-2], shape[-1]
    return rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), shape)


class Linear(Module):
    def __init__(self, d_in, d_out, rng, name, bias=True, scale=1.0):
        self.weight = Parameter(glorot(rng, (d_in, d_out)) * scale, f"{name}.w")
        self.bias = Parameter(np.zeros(d_out), f"{name}.b") if bias else None

    def __call__(self, x):
        return T.linear(x, self.weight, self.bias)


class AddNorm(Module):
    """``add_norm`` with its own gain and bias when layer-normalising."""

    def __init__(self, d, name, mode="layer_norm"):
        self.mode = mode
        if mode == "layer_norm":
            self.gain = Parameter(np.ones(d), f"{name}.gain")
            self.bias = Parameter(np.zeros(d), f"{name}.bias")
        else:
            self.gain = self.bias = None

    def __call__(self, a, b):
        return T.add_norm(a, b, self.mode, self.gain, self.bias)


class LSTM(Module):
    """Single-direction LSTM over ``[B, M, d_in]`` with a padding mask."""

    def __init__(self, d_in, hidden, rng, name):
        self.hidden = hidden
        self.w_x = Parameter(glorot(rng, (d_in, 4 * hidden)), f"{name}.wx")
        self.w_h = Parameter(glorot(rng, (hidden, 4 * hidden)), f"{name}.wh")
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0  # forget gate starts open
        self.b = Parameter(b, f"{name}.b")

    def zero_state(self, batch):
        z = Tensor(np.zeros((batch, self.hidden)))
        return z, z

    def step(self, x, h, c):
        return T.lstm_cell(x, h, c, self.w_x, self.w_h, self.b)

    def __call__(self, x, mask=None, reverse=False):
        B, M, _ = x.shape
        xw = T.matmul(x, self.w_x) + self.b
        h, c = self.zero_state(B)
        outs = [None] * M
        steps = range(M - 1, -1, -1) if reverse else range(M)
        for t in steps:
            gates = xw[:, t, :] + T.matmul(h, self.w_h)
            h_new, c_new = T.lstm_gates(gates, c)
            if mask is not None and not mask[:, t].all():
                keep = Tensor(mask[:, t, None].astype(np.float64))
                h = h_new * keep + h * (1.0 - keep.data)
                c = c_new * keep + c * (1.0 - keep.data)
            else:
                h, c = h_new, c_new
            outs[t] = h
        return T.stack(outs, axis=1)


class BiLSTM(Module):
    """Forward and backward LSTMs, concatenated and projected back to ``d``."""

    def __init__(self, d, rng, name):
        self.fwd = LSTM(d, d, rng, f"{name}.fwd")
        self.bwd = LSTM(d, d, rng, f"{name}.bwd")
        self.proj = Linear(2 * d, d, rng, f"{name}.proj")

    def __call__(self, x, mask=None):
        both = T.concat([self.fwd(x, mask), self.bwd(x, mask, reverse=True)], axis=-1)
        return self.proj(both)


def _split_heads(x, heads):
    B, M, d = x.shape
    return x.reshape(B, M, heads, d // heads).swapaxes(1, 2)


def _merge_heads(x):
    B, h, M, dh = x.shape
    return x.swapaxes(1, 2).reshape(B, M, h * dh)


class SelfAttention(Module):
    """Transformer-style multi-head self-attention with an output projection."""

    def __init__(self, d, heads, rng, name):
        if d % heads:
            raise ValueError(f"d_model {d} not divisible by {heads} heads")
        self.heads = heads
        self.w_q = Linear(d, d, rng, f"{name}.q", bias=False)
        self.w_k = Linear(d, d, rng, f"{name}.k", bias=False)
        self.w_v = Linear(d, d, rng, f"{name}.v", bias=False)
        self.w_o = Linear(d, d, rng, f"{name}.o", bias=False)
        self.last_weights = None

    def __call__(self, x, mask=None):
        q = _split_heads(self.w_q(x), self.heads)
        k = _split_heads(self.w_k(x), self.heads)
        v = _split_heads(self.w_v(x), self.heads)
        scores = T.matmul(q, k.swapaxes(-1, -2)) * (1.0 / np.sqrt(q.shape[-1]))
        key_mask = None if mask is None else mask[:, None, None, :]
        a = T.softmax(scores, axis=-1, mask=key_mask)
        self.last_weights = a.data
        return self.w_o(_merge_heads(T.matmul(a, v)))


class FeedForward(Module):
    def __init__(self, d, rng, name, expand=4):
        self.inner = Linear(d, expand * d, rng, f"{name}.inner")
        self.outer = Linear(expand * d, d, rng, f"{name}.outer")

    def __call__(self, x):
        return self.outer(T.relu(self.inner(x)))


class ConvGLU(Module):
    """Same-padded convolution to ``2d`` channels followed by a GLU."""

    def __init__(self, d, kernel, rng, name):
        if kernel % 2 == 0:
            raise ValueError(f"kernel width must be odd, got {kernel}")
        self.kernel = Parameter(rng.normal(0.0, np.sqrt(1.0 / (kernel * d)), (kernel, d, 2 * d)), f"{name}.kernel")
        self.bias = Parameter(np.zeros(2 * d), f"{name}.bias")

    def __call__(self, x, mask=None):
        if mask is not None:
            x = x * Tensor(mask[..., None].astype(np.float64))
        return T.glu(T.conv1d(x, self.kernel, self.bias))
