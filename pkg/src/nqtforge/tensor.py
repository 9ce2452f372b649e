"""A small dense tensor type with reverse-mode differentiation.

Values are float64 numpy arrays.  Every operation records its parents and a
closure that pushes the output gradient back to them; ``Tensor.backward``
walks the graph in reverse topological order.  Leading axes are treated as
batch axes wherever that makes sense, so the same code runs on ``[M, d]``
sequences and ``[B, M, d]`` batches.
"""
from __future__ import annotations

import json
import math
from collections import OrderedDict
from pathlib import Path

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        for node in order:
            if node._backward is not None:
                node.grad = None
        self._accumulate(np.asarray(grad, dtype=DTYPE))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return mul(self, 1.0 / other) if np.isscalar(other) else div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)


class Parameter(Tensor):
    __slots__ = ("name",)

    def __init__(self, data, name=""):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def _accumulate(self, g):
        if self.grad is None or self.grad.shape != self.data.shape:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


class _GradMode:
    enabled = True


class no_grad:
    """Context manager that stops graph recording (inference only)."""

    def __enter__(self):
        self._prev = _GradMode.enabled
        _GradMode.enabled = False

    def __exit__(self, *exc):
        _GradMode.enabled = self._prev


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    req = _GradMode.enabled and any(p.requires_grad for p in parents)
    return Tensor(data, req, tuple(parents) if req else (), backward if req else None)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- elementwise ----------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))
    return _make(a.data + b.data, (a, b), back)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))
    return _make(a.data - b.data, (a, b), back)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))
    return _make(a.data * b.data, (a, b), back)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data ** 2), b.shape))
    return _make(a.data / b.data, (a, b), back)


def exp(x):
    out = np.exp(x.data)
    return _make(out, (x,), lambda g: x._accumulate(g * out))


def log(x):
    return _make(np.log(x.data), (x,), lambda g: x._accumulate(g / x.data))


def sqrt(x):
    out = np.sqrt(x.data)
    return _make(out, (x,), lambda g: x._accumulate(g * 0.5 / out))


def tanh(x):
    out = np.tanh(x.data)
    return _make(out, (x,), lambda g: x._accumulate(g * (1.0 - out * out)))


def _sigmoid(z):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid(x):
    out = _sigmoid(x.data)
    return _make(out, (x,), lambda g: x._accumulate(g * out * (1.0 - out)))


def relu(x):
    mask = x.data > 0
    return _make(x.data * mask, (x,), lambda g: x._accumulate(g * mask))


# -- shape ops ------------------------------------------------------------

def reshape(x, shape):
    return _make(x.data.reshape(shape), (x,), lambda g: x._accumulate(g.reshape(x.shape)))


def swapaxes(x, a, b):
    return _make(np.swapaxes(x.data, a, b), (x,), lambda g: x._accumulate(np.swapaxes(g, a, b)))


def _is_basic(index):
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (slice, int, np.integer)) or i is Ellipsis or i is None for i in items)


def getitem(x, index):
    basic = _is_basic(index)

    def back(g):
        full = np.zeros_like(x.data)
        if basic:
            full[index] += g
        else:
            np.add.at(full, index, g)
        x._accumulate(full)
    return _make(x.data[index], (x,), back)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def back(g):
        for t, piece in zip(tensors, np.split(g, bounds, axis=axis)):
            if t.requires_grad:
                t._accumulate(piece)
    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, back)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def back(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accumulate(np.take(g, i, axis=axis))
    return _make(np.stack([t.data for t in tensors], axis=axis), tensors, back)


def split(x, parts, axis=-1):
    n = x.shape[axis]
    if n % parts:
        raise ShapeError(f"cannot split extent {n} into {parts} equal parts")
    step = n // parts
    axis = axis % x.ndim
    out = []
    for k in range(parts):
        index = [slice(None)] * x.ndim
        index[axis] = slice(k * step, (k + 1) * step)
        out.append(getitem(x, tuple(index)))
    return out


def tsum(x, axis=None, keepdims=False):
    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.shape))
    return _make(x.data.sum(axis=axis, keepdims=keepdims), (x,), back)


def mean(x, axis=None, keepdims=False):
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return tsum(x, axis, keepdims) * (1.0 / n)


# -- linear algebra -------------------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul needs operands of rank >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def back(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))
    return _make(a.data @ b.data, (a, b), back)


def linear(x, weight, bias=None):
    y = matmul(x, weight)
    return y + bias if bias is not None else y


# -- normalisation and probabilities -------------------------------------

def softmax(x, axis=-1, mask=None):
    """Softmax along ``axis``; ``mask`` (bool, broadcastable) marks allowed entries."""
    z = x.data
    if mask is not None:
        z = np.where(mask, z, -np.inf)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        x._accumulate(out * (g - (g * out).sum(axis=axis, keepdims=True)))
    return _make(out, (x,), back)


def log_softmax(x, axis=-1):
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    p = np.exp(out)
    return _make(out, (x,), lambda g: x._accumulate(g - p * g.sum(axis=axis, keepdims=True)))


def layer_norm(x, gain=None, bias=None, eps=1e-5):
    """Normalise the last axis to zero mean and unit variance, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    d = x.shape[-1]

    def back(g):
        gx = g * gain.data if gain is not None else g
        if x.requires_grad:
            x._accumulate(inv / d * (d * gx - gx.sum(-1, keepdims=True)
                                     - xhat * (gx * xhat).sum(-1, keepdims=True)))
        if gain is not None and gain.requires_grad:
            gain._accumulate(_unbroadcast(g * xhat, gain.shape))
        if bias is not None and bias.requires_grad:
            bias._accumulate(_unbroadcast(g, bias.shape))
    out = xhat
    if gain is not None:
        out = out * gain.data
    if bias is not None:
        out = out + bias.data
    parents = [x] + [p for p in (gain, bias) if p is not None]
    return _make(out, parents, back)


SQRT_HALF = math.sqrt(0.5)


def add_norm(a, b, mode="layer_norm", gain=None, bias=None):
    """Residual merge: layer-normalised ``a + b`` or ``(a + b) * sqrt(0.5)``."""
    if a.shape != b.shape:
        raise ShapeError(f"add_norm shape mismatch {a.shape} vs {b.shape}")
    s = add(a, b)
    if mode == "scaled":
        return s * SQRT_HALF
    if mode == "layer_norm":
        return layer_norm(s, gain, bias)
    if mode == "none":
        return s
    raise ValueError(f"unknown add_norm mode {mode!r}")


# -- lookups and losses ---------------------------------------------------

def embedding_lookup(table, ids):
    ids = np.asarray(ids, dtype=np.int64)

    def back(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        table._accumulate(full)
    return _make(table.data[ids], (table,), back)


def cross_entropy(logits, targets, ignore_index=None):
    """Mean negative log-likelihood of integer ``targets`` under ``logits``.

    Positions whose target equals ``ignore_index`` do not count.
    """
    targets = np.asarray(targets, dtype=np.int64)
    flat = logits.data.reshape(-1, logits.shape[-1])
    t = targets.reshape(-1)
    if flat.shape[0] != t.shape[0]:
        raise ShapeError(f"{flat.shape[0]} logit rows for {t.shape[0]} targets")
    keep = np.ones_like(t, dtype=bool) if ignore_index is None else t != ignore_index
    n = max(int(keep.sum()), 1)
    z = flat - flat.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.arange(t.shape[0])
    loss = -(logp[rows, t] * keep).sum() / n

    def back(g):
        grad = np.exp(logp)
        grad[rows, t] -= 1.0
        grad *= keep[:, None] / n
        logits._accumulate((g * grad).reshape(logits.shape))
    return _make(np.asarray(loss), (logits,), back)


# -- sequence ops ---------------------------------------------------------

def conv1d(x, kernel, bias=None):
    """Same-padded 1-D convolution over the sequence axis.

    ``x`` is ``[M, d_in]`` or ``[B, M, d_in]``; ``kernel`` is
    ``[k, d_in, d_out]`` with odd ``k``.
    """
    k, d_in, d_out = kernel.shape
    if k % 2 == 0:
        raise ShapeError(f"kernel width must be odd, got {k}")
    if x.shape[-1] != d_in:
        raise ShapeError(f"conv1d expects {d_in} input channels, got {x.shape[-1]}")
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    B, M, _ = xd.shape
    pad = k // 2
    xp = np.pad(xd, ((0, 0), (pad, pad), (0, 0)))
    cols = np.stack([xp[:, j:j + M, :] for j in range(k)], axis=2).reshape(B, M, k * d_in)
    w2 = kernel.data.reshape(k * d_in, d_out)
    out = cols @ w2
    if bias is not None:
        out = out + bias.data

    def back(g):
        g3 = g[None] if squeeze else g
        if kernel.requires_grad:
            kernel._accumulate((cols.reshape(-1, k * d_in).T @ g3.reshape(-1, d_out)).reshape(kernel.shape))
        if bias is not None and bias.requires_grad:
            bias._accumulate(_unbroadcast(g3, bias.shape))
        if x.requires_grad:
            dcols = (g3 @ w2.T).reshape(B, M, k, d_in)
            dxp = np.zeros_like(xp)
            for j in range(k):
                dxp[:, j:j + M, :] += dcols[:, :, j, :]
            dx = dxp[:, pad:pad + M, :]
            x._accumulate(dx[0] if squeeze else dx)
    parents = [x, kernel] + ([bias] if bias is not None else [])
    return _make(out[0] if squeeze else out, parents, back)


def glu(x):
    """Gated linear unit: first half of the last axis times sigmoid of the second."""
    if x.shape[-1] % 2:
        raise ShapeError(f"GLU needs an even last extent, got {x.shape[-1]}")
    a, b = split(x, 2, axis=-1)
    return a * sigmoid(b)


def dropout(x, rate, rng, training=True):
    if not training or rate <= 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * Tensor(mask)


def lstm_cell(x, h, c, w_x, w_h, b):
    """One LSTM step with fused gate weights ordered input, forget, cell, output.

    ``w_x`` is ``[d_in, 4H]``, ``w_h`` is ``[H, 4H]``, ``b`` is ``[4H]``.
    Returns ``(h', c')``.
    """
    gates = matmul(x, w_x) + matmul(h, w_h) + b
    return lstm_gates(gates, c)


def lstm_gates(gates, c):
    i, f, g, o = split(gates, 4, axis=-1)
    c_new = sigmoid(f) * c + sigmoid(i) * tanh(g)
    h_new = sigmoid(o) * tanh(c_new)
    return h_new, c_new


# -- gradient checking ----------------------------------------------------

def grad_check(f, params, eps=1e-5, samples=None, seed=0, floor=1e-6):
    """Largest relative error between reverse-mode and central-difference gradients.

    ``f`` rebuilds and returns a scalar tensor on every call.  With
    ``samples`` set, at most that many coordinates per parameter are probed.
    """
    for p in params:
        p.grad = np.zeros_like(p.data)
    out = f()
    out.backward()
    analytic = [p.grad.copy() for p in params]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if samples is not None and flat.size > samples:
            idx = rng.choice(flat.size, size=samples, replace=False)
        for j in idx:
            orig = flat[j]
            flat[j] = orig + eps
            fp = f().item()
            flat[j] = orig - eps
            fm = f().item()
            flat[j] = orig
            num = (fp - fm) / (2 * eps)
            ana = ga.reshape(-1)[j]
            worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), floor))
    return worst


# -- checkpoints ----------------------------------------------------------

MAGIC = b"NQTCKPT 1\n"


def save_parameters(path, params, header=None):
    """Write ``params`` (name -> array or Parameter) with an optional JSON header.

    Layout: magic line, JSON header line, parameter count line, then per
    parameter a ``name d1,d2,...`` line followed by raw little-endian float64.
    """
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header or {}, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(f"{len(params)}\n".encode())
        for name, value in params.items():
            arr = np.ascontiguousarray(value.data if isinstance(value, Tensor) else value, dtype="<f8")
            if " " in name:
                raise ValueError(f"parameter names may not contain spaces: {name!r}")
            fh.write(f"{name} {','.join(map(str, arr.shape))}\n".encode("utf-8"))
            fh.write(arr.tobytes())
    tmp.replace(path)


def load_parameters(path):
    """Inverse of :func:`save_parameters`; returns ``(header, OrderedDict)``."""
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise ValueError(f"{path} is not a parameter checkpoint")
        header = json.loads(fh.readline().decode("utf-8"))
        count = int(fh.readline())
        out = OrderedDict()
        for _ in range(count):
            name, dims = fh.readline().decode("utf-8").rstrip("\n").split(" ")
            shape = tuple(int(d) for d in dims.split(",") if d)
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise ValueError(f"{path}: truncated data for {name}")
            out[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(DTYPE)
    return header, out


class Adam:
    """Adam with optional global-norm gradient clipping."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, clip=None):
        self.params = list(params)
        self.lr, self.eps, self.clip = lr, eps, clip
        self.b1, self.b2 = betas
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def grad_norm(self):
        return math.sqrt(sum(float((p.grad ** 2).sum()) for p in self.params))

    def step(self):
        self.t += 1
        scale = 1.0
        if self.clip is not None:
            norm = self.grad_norm()
            if norm > self.clip:
                scale = self.clip / norm
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad * scale
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
