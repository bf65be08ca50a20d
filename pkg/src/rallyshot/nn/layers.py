"""Dense float64 layers with paired hand-written forward/backward passes.

There is no autodiff graph here: each layer caches what its backward pass
needs, and models chain backward calls in reverse order. Everything is
verifiable against central finite differences (see gradcheck).
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, ValidationError
from .graph import SkeletonGraph


class Parameter:
    """A named trainable array with an accumulated gradient of equal shape."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def xavier(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class Linear:
    """y = x @ W + b over the last axis; arbitrary leading dimensions."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, name: str):
        self.w = Parameter(f"{name}.w", xavier(rng, (d_in, d_out), d_in, d_out))
        self.b = Parameter(f"{name}.b", np.zeros(d_out))
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.w.value.shape[0]:
            raise ShapeError(f"{self.w.name}: expected last dim {self.w.value.shape[0]}, "
                             f"got {x.shape[-1]}")
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x = self._x
        x2 = x.reshape(-1, x.shape[-1])
        dy2 = dy.reshape(-1, dy.shape[-1])
        self.w.grad += x2.T @ dy2
        self.b.grad += dy2.sum(axis=0)
        return dy @ self.w.value.T

    def params(self) -> list[Parameter]:
        return [self.w, self.b]


class GraphConv:
    """Per-frame graph convolution: y_t = G_norm @ x_t @ W."""

    def __init__(self, c_in: int, c_out: int, graph: SkeletonGraph,
                 rng: np.random.Generator, name: str):
        self.graph = graph
        self.w = Parameter(f"{name}.w", xavier(rng, (c_in, c_out), c_in, c_out))
        self._gx = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        g = self.graph.normalized
        if x.shape[-2] != g.shape[0] or x.shape[-1] != self.w.value.shape[0]:
            raise ShapeError(f"{self.w.name}: input shape {x.shape} does not match "
                             f"graph {g.shape} / weight {self.w.value.shape}")
        gx = np.matmul(g, x)
        self._gx = gx
        return gx @ self.w.value

    def backward(self, dy: np.ndarray) -> np.ndarray:
        gx2 = self._gx.reshape(-1, self._gx.shape[-1])
        dy2 = dy.reshape(-1, dy.shape[-1])
        self.w.grad += gx2.T @ dy2
        dgx = dy @ self.w.value.T
        return np.matmul(self.graph.normalized.T, dgx)

    def params(self) -> list[Parameter]:
        return [self.w]


def graph_conv(x: np.ndarray, w: np.ndarray, graph: SkeletonGraph) -> np.ndarray:
    """Functional form of GraphConv.forward for callers that hold raw arrays."""
    return np.einsum("jk,...kc->...jc", graph.normalized, x) @ w


class TemporalConv:
    """1-D convolution along the frame axis, independently per joint.

    Input is (B, T, J, C); the kernel is (k, C, C) with zero padding of
    (k - 1) / 2 frames on each temporal end, so T is preserved.
    """

    def __init__(self, channels: int, k: int, rng: np.random.Generator, name: str):
        if k % 2 == 0:
            raise ValidationError(f"temporal kernel width must be odd, got {k}")
        self.k = k
        fan = channels * k
        self.w = Parameter(f"{name}.w", xavier(rng, (k, channels, channels), fan, fan))
        self._padded = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[-1] != self.w.value.shape[1]:
            raise ShapeError(f"{self.w.name}: expected (B, T, J, {self.w.value.shape[1]}), "
                             f"got {x.shape}")
        b, t, j, c = x.shape
        pad = (self.k - 1) // 2
        xp = np.zeros((b, t + 2 * pad, j, c))
        xp[:, pad:pad + t] = x
        self._padded = xp
        # sum of one GEMM per kernel tap; avoids materializing tap windows
        y = np.zeros((b, t, j, self.w.value.shape[2]))
        for u in range(self.k):
            y += xp[:, u:u + t] @ self.w.value[u]
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        xp = self._padded
        b, tp, j, c = xp.shape
        pad = (self.k - 1) // 2
        t = tp - 2 * pad
        dy2 = dy.reshape(-1, dy.shape[-1])
        dxp = np.zeros_like(xp)
        for u in range(self.k):
            self.w.grad[u] += xp[:, u:u + t].reshape(-1, c).T @ dy2
            dxp[:, u:u + t] += dy @ self.w.value[u].T
        return dxp[:, pad:pad + t]

    def params(self) -> list[Parameter]:
        return [self.w]


class LayerNorm:
    """Normalization over the channel (last) axis with learned gain and shift."""

    def __init__(self, dim: int, name: str, eps: float = 1e-6):
        self.eps = eps
        self.gamma = Parameter(f"{name}.gamma", np.ones(dim))
        self.beta = Parameter(f"{name}.beta", np.zeros(dim))
        self._xhat = None
        self._inv_std = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu) * inv_std
        self._xhat, self._inv_std = xhat, inv_std
        return xhat * self.gamma.value + self.beta.value

    def backward(self, dy: np.ndarray) -> np.ndarray:
        xhat, inv_std = self._xhat, self._inv_std
        red = tuple(range(dy.ndim - 1))
        self.gamma.grad += (dy * xhat).sum(axis=red)
        self.beta.grad += dy.sum(axis=red)
        dxhat = dy * self.gamma.value
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        return (dxhat - m1 - xhat * m2) * inv_std

    def params(self) -> list[Parameter]:
        return [self.gamma, self.beta]


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return np.where(self._mask, dy, 0.0)

    def params(self) -> list[Parameter]:
        return []


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax; rows sum to one."""
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def attention_forward(q: np.ndarray, k: np.ndarray, v: np.ndarray):
    """Scaled dot-product attention: softmax(q kᵀ / sqrt(d)) v.

    q, k, v share the last two axes (T, d); any leading batch/head axes are
    allowed. Returns (output, cache) for attention_backward.
    """
    if q.shape[-1] != k.shape[-1] or k.shape[:-1] != v.shape[:-1]:
        raise ShapeError(f"attention shapes do not conform: {q.shape}, {k.shape}, {v.shape}")
    d = q.shape[-1]
    scores = q @ np.swapaxes(k, -1, -2) / np.sqrt(d)
    weights = softmax(scores, axis=-1)
    out = weights @ v
    return out, (q, k, v, weights)


def attention_backward(dout: np.ndarray, cache):
    q, k, v, weights = cache
    d = q.shape[-1]
    dv = np.swapaxes(weights, -1, -2) @ dout
    dw = dout @ np.swapaxes(v, -1, -2)
    # softmax backward, row-wise over the key axis
    ds = weights * (dw - (dw * weights).sum(axis=-1, keepdims=True))
    dq = ds @ k / np.sqrt(d)
    dk = np.swapaxes(ds, -1, -2) @ q / np.sqrt(d)
    return dq, dk, dv


def attention(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    out, _ = attention_forward(q, k, v)
    return out


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-softmax of the true class.

    Returns (loss, dloss/dlogits) with the gradient already divided by the
    batch size: (softmax - onehot) / N.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be (N, C), got {logits.shape}")
    n, c = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels must be ({n},), got {labels.shape}")
    if np.any(labels < 0) or np.any(labels >= c):
        raise ValidationError(f"labels must lie in [0, {c})", field="labels")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = -log_probs[np.arange(n), labels].mean()
    grad = softmax(logits, axis=1)
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n


def cosine_similarity(a: np.ndarray, b: np.ndarray, axis: int = -1) -> np.ndarray:
    na = np.linalg.norm(a, axis=axis, keepdims=True)
    nb = np.linalg.norm(b, axis=axis, keepdims=True)
    return ((a / na) * (b / nb)).sum(axis=axis)


def mean_pool_forward(x: np.ndarray, axis: int):
    return x.mean(axis=axis), (x.shape, axis)


def mean_pool_backward(dy: np.ndarray, cache) -> np.ndarray:
    shape, axis = cache
    dy = np.expand_dims(dy, axis)
    return np.broadcast_to(dy / shape[axis], shape).copy()
