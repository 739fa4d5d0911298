"""Reverse-mode autodiff over numpy arrays with the ops the color model needs:
linear maps, softmax, layer norm, dropout, multi-head attention, cross-entropy
with an ignore marker, and Adam.

Parameters store float32 by default; reductions accumulate in float64.
Gradient checking runs the whole stack in float64 by constructing float64
tensors.
"""

from __future__ import annotations

import math
import warnings
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

_grad_enabled = True


@contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """Dense array with an optional gradient and a backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        if self.data.ndim != 0:
            raise ValueError("backward requires a scalar loss")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # arithmetic sugar; scalars become constants
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __radd__(self, other):
        return add(_as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.dtype))

    def __mul__(self, other):
        return mul(self, _as_tensor(other, self.dtype))

    def __rmul__(self, other):
        return mul(_as_tensor(other, self.dtype), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other, self.dtype))

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, _as_tensor(-1.0, self.dtype))


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad or p._backward is not None for p in parents):
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum-reduce a gradient back to the shape it was broadcast from."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad or a._backward:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad or b._backward:
            b.accumulate_grad(_unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def backward(g):
        if a.requires_grad or a._backward:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad or b._backward:
            b.accumulate_grad(_unbroadcast(-g, b.data.shape))

    return _make(out_data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad or a._backward:
            a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad or b._backward:
            b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data / b.data

    def backward(g):
        if a.requires_grad or a._backward:
            a.accumulate_grad(_unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad or b._backward:
            b.accumulate_grad(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(out_data, (a, b), backward)


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)

    def backward(g):
        a.accumulate_grad(g * 0.5 / out_data)

    return _make(out_data, (a,), backward)


def gelu(a: Tensor) -> Tensor:
    x = a.data
    cdf = 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
    out_data = (x * cdf).astype(x.dtype)

    def backward(g):
        pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
        a.accumulate_grad(g * (cdf + x * pdf).astype(x.dtype))

    return _make(out_data, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad or a._backward:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a.accumulate_grad(_unbroadcast(ga, a.data.shape))
        if b.requires_grad or b._backward:
            gb = np.swapaxes(a.data, -1, -2) @ g
            b.accumulate_grad(_unbroadcast(gb, b.data.shape))

    return _make(out_data, (a, b), backward)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = a.data.reshape(shape)

    def backward(g):
        a.accumulate_grad(g.reshape(a.data.shape))

    return _make(out_data, (a,), backward)


def swapaxes(a: Tensor, ax1: int, ax2: int) -> Tensor:
    out_data = np.swapaxes(a.data, ax1, ax2)

    def backward(g):
        a.accumulate_grad(np.swapaxes(g, ax1, ax2))

    return _make(out_data, (a,), backward)


def concat(parts: list[Tensor], axis: int) -> Tensor:
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum(sizes)[:-1]

    def backward(g):
        for p, piece in zip(parts, np.split(g, offsets, axis=axis)):
            if p.requires_grad or p._backward:
                p.accumulate_grad(piece)

    return _make(out_data, tuple(parts), backward)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids)
    out_data = table.data[ids]

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.data.shape[-1]))
        table.accumulate_grad(gt)

    return _make(out_data, (table,), backward)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out_data = a.data.sum(axis=axis, keepdims=keepdims, dtype=np.float64).astype(a.dtype)

    def backward(g):
        if axis is None:
            a.accumulate_grad(np.broadcast_to(g, a.data.shape).astype(a.dtype))
            return
        gg = g if keepdims else np.expand_dims(g, axis)
        a.accumulate_grad(np.broadcast_to(gg, a.data.shape).astype(a.dtype))

    return _make(out_data, (a,), backward)


def mean_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum_(a, axis, keepdims), _as_tensor(1.0 / n, a.dtype))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax; rows whose inputs are all -inf come out as zeros."""
    x = a.data
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x - m)
    s = e.sum(axis=axis, keepdims=True, dtype=np.float64)
    y = (e / np.where(s > 0.0, s, 1.0)).astype(x.dtype)

    def backward(g):
        inner = (g * y).sum(axis=axis, keepdims=True, dtype=np.float64).astype(x.dtype)
        a.accumulate_grad(y * (g - inner))

    out = _make(y, (a,), backward)
    return out


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    m = np.max(x, axis=axis, keepdims=True)
    z = x - m
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True, dtype=np.float64)).astype(x.dtype)
    y = z - lse

    def backward(g):
        gsum = g.sum(axis=axis, keepdims=True, dtype=np.float64).astype(x.dtype)
        a.accumulate_grad(g - np.exp(y) * gsum)

    return _make(y, (a,), backward)


IGNORE_LABEL = -1


def cross_entropy(logits: Tensor, labels: np.ndarray, ignore_index: int = IGNORE_LABEL) -> Tensor:
    """Mean negative log-softmax over positions whose label is not the ignore marker."""
    labels = np.asarray(labels)
    logp = log_softmax(logits, axis=-1)
    valid = labels != ignore_index
    n = int(valid.sum())
    if n == 0:
        raise ValueError("cross_entropy: every position carries the ignore marker")
    idx = np.nonzero(valid)
    picked = logp.data[idx + (labels[valid],)]
    loss_data = np.asarray(-picked.sum(dtype=np.float64) / n, dtype=logits.dtype)

    def backward(g):
        gl = np.zeros_like(logp.data)
        gl[idx + (labels[valid],)] = -float(g) / n
        logp.accumulate_grad(gl)

    return _make(loss_data, (logp,), backward)


def dropout(a: Tensor, p: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    if p < 0.0 or p >= 1.0:
        raise ValueError(f"dropout rate {p} outside [0,1)")
    if not train or p == 0.0:
        return a
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    mask = (rng.random(a.data.shape) >= p).astype(a.dtype) / (1.0 - p)
    return mul(a, Tensor(mask))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    mu = mean_(x, axis=-1, keepdims=True)
    centered = sub(x, mu)
    var = mean_(mul(centered, centered), axis=-1, keepdims=True)
    std = sqrt(add(var, _as_tensor(eps, x.dtype)))
    return add(mul(div(centered, std), gain), bias)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    out = matmul(x, w)
    if b is not None:
        out = add(out, b)
    return out


@dataclass
class AttentionParams:
    """Projection weights for one multi-head attention block."""

    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor
    heads: int
    width: int

    def __post_init__(self):
        if self.width % self.heads != 0:
            raise ValueError(f"width {self.width} not divisible by {self.heads} heads")

    def tensors(self) -> list[tuple[str, Tensor]]:
        return [
            ("wq", self.wq), ("bq", self.bq), ("wk", self.wk), ("bk", self.bk),
            ("wv", self.wv), ("bv", self.bv), ("wo", self.wo), ("bo", self.bo),
        ]


def attention(q_in: Tensor, kv_in: Tensor, key_valid: np.ndarray, params: AttentionParams,
              warn_dead_rows: bool = True) -> Tensor:
    """Scaled dot-product multi-head attention with a key validity mask.

    Invalid keys get -inf logits; query rows with no valid key at all yield a
    zero output row (and a warning, since callers normally guarantee at least
    one valid key).
    """
    if q_in.data.ndim != 3 or kv_in.data.ndim != 3:
        raise ValueError("attention expects batched 3-d inputs")
    bsz, lq, d = q_in.data.shape
    lk = kv_in.data.shape[1]
    if d != params.width or kv_in.data.shape[-1] != params.width:
        raise ValueError(f"attention width mismatch: inputs {d}/{kv_in.data.shape[-1]}, params {params.width}")
    key_valid = np.asarray(key_valid, dtype=bool)
    if key_valid.shape != (bsz, lk):
        raise ValueError(f"key mask shape {key_valid.shape} != {(bsz, lk)}")
    h = params.heads
    e = d // h

    def split_heads(t: Tensor) -> Tensor:
        t = reshape(t, (bsz, t.data.shape[1], h, e))
        return swapaxes(t, 1, 2)

    q = split_heads(linear(q_in, params.wq, params.bq))
    k = split_heads(linear(kv_in, params.wk, params.bk))
    v = split_heads(linear(kv_in, params.wv, params.bv))

    scores = mul(matmul(q, swapaxes(k, -1, -2)), _as_tensor(1.0 / math.sqrt(e), q_in.dtype))
    bias = np.where(key_valid, 0.0, -np.inf).astype(q_in.dtype)[:, None, None, :]
    weights = softmax(add(scores, Tensor(bias)), axis=-1)

    out = matmul(weights, v)
    out = reshape(swapaxes(out, 1, 2), (bsz, lq, d))
    out = linear(out, params.wo, params.bo)

    dead = ~key_valid.any(axis=-1)
    if dead.any():
        if warn_dead_rows:
            warnings.warn("attention: some rows have no valid key; emitting zeros", RuntimeWarning)
        keep = np.ones((bsz, 1, 1), dtype=q_in.dtype)
        keep[dead] = 0.0
        out = mul(out, Tensor(np.broadcast_to(keep, (bsz, lq, 1))))
    return out


class Adam:
    """Adam with bias correction over a list of parameter tensors."""

    def __init__(self, params: list[Tensor], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        if all(p.grad is None for p in self.params):
            raise RuntimeError("optimizer step before backward: no gradients present")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:  # parameter not on the active graph (e.g. disabled block)
                continue
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        return self.m, self.v
