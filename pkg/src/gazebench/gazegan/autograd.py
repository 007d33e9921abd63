"""Minimal reverse-mode differentiation over float64 numpy arrays.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to parent gradients.  ``backward``
walks the graph in reverse topological order and accumulates ``.grad`` on
every tensor that requires it.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .. import _kernels
from ..core import GazeBenchError


class Tensor:
    """Rank-4 (batch, channel, height, width) activations, or any shape for params."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, parents: Sequence["Tensor"] = (),
                 backward: Callable | None = None, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = tuple(parents)
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.shape}, name={self.name!r})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise GazeBenchError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topo(self)
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for t in order:
            g = grads.pop(id(t), None)
            if g is None:
                continue
            if t._backward is None:
                t.grad = g if t.grad is None else t.grad + g
                continue
            for p, pg in zip(t._parents, t._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                k = id(p)
                grads[k] = pg if k not in grads else grads[k] + pg

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)


def _topo(root: Tensor) -> list[Tensor]:
    seen = set()
    order = []
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    order.reverse()
    return order


def parameter(data, name=None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return Tensor(a.data + b.data, parents=(a, b),
                  backward=lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return Tensor(a.data * b.data, parents=(a, b),
                  backward=lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    pos = x.data > 0
    return Tensor(np.where(pos, x.data, slope * x.data), parents=(x,),
                  backward=lambda g: (np.where(pos, g, slope * g),))


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0
    return Tensor(np.where(pos, x.data, 0.0), parents=(x,), backward=lambda g: (np.where(pos, g, 0.0),))


def sigmoid(x: Tensor) -> Tensor:
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return Tensor(s, parents=(x,), backward=lambda g: (g * s * (1.0 - s),))


def concat_channels(xs: Sequence[Tensor]) -> Tensor:
    xs = [_as_tensor(x) for x in xs]
    sizes = [x.shape[1] for x in xs]
    if len({(x.shape[0],) + x.shape[2:] for x in xs}) != 1:
        raise GazeBenchError(f"cannot concatenate shapes {[x.shape for x in xs]}")
    cuts = np.cumsum(sizes)[:-1]
    return Tensor(np.concatenate([x.data for x in xs], axis=1), parents=xs,
                  backward=lambda g: tuple(np.split(g, cuts, axis=1)))


def spatial_softmax(x: Tensor) -> Tensor:
    """Softmax over all spatial positions of each (batch, channel) plane."""
    z = x.data - x.data.max(axis=(2, 3), keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=(2, 3), keepdims=True)

    def back(g):
        return (s * (g - (g * s).sum(axis=(2, 3), keepdims=True)),)

    return Tensor(s, parents=(x,), backward=back)


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 mean pooling (spatial sizes must be even)."""
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise GazeBenchError(f"avg_pool2 needs even spatial size, got {h}x{w}")
    out = x.data.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def back(g):
        return (np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25,)

    return Tensor(out, parents=(x,), backward=back)


def total(x: Tensor) -> Tensor:
    return Tensor(x.data.sum(), parents=(x,), backward=lambda g: (np.broadcast_to(g, x.shape).copy(),))


def attach(x: Tensor, value: float, grad_x: np.ndarray) -> Tensor:
    """Scalar node whose value and gradient w.r.t. ``x`` were computed elsewhere."""
    grad_x = np.asarray(grad_x, dtype=np.float64)
    if grad_x.shape != x.shape:
        raise GazeBenchError(f"gradient shape {grad_x.shape} != tensor shape {x.shape}")
    return Tensor(float(value), parents=(x,), backward=lambda g: (g * grad_x,))


def sum_scalars(xs: Sequence[Tensor], weights: Sequence[float] | None = None) -> Tensor:
    weights = [1.0] * len(xs) if weights is None else list(weights)
    val = sum(w * float(x.data) for w, x in zip(weights, xs))
    return Tensor(val, parents=tuple(xs), backward=lambda g: tuple(w * g for w in weights))


# ---------------------------------------------------------------------------
# convolutions


def conv_output_size(n: int, k: int, stride: int, padding: int) -> int:
    return (n + 2 * padding - k) // stride + 1


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation; ``w`` has shape (out_channels, in_channels, k, k)."""
    bsz, c, h, wd = x.shape
    o, ci, k, k2 = w.shape
    if ci != c or k != k2:
        raise GazeBenchError(f"conv2d: input {x.shape} incompatible with kernel {w.shape}")
    ho, wo = conv_output_size(h, k, stride, padding), conv_output_size(wd, k, stride, padding)
    if ho < 1 or wo < 1:
        raise GazeBenchError(f"conv2d: input {h}x{wd} too small for kernel {k}, stride {stride}, padding {padding}")
    p = padding
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p))) if p else np.ascontiguousarray(x.data)
    cols = _kernels.im2col(xp, k, stride, ho, wo)
    w2 = w.data.reshape(o, -1)
    out = np.matmul(w2, cols).reshape(bsz, o, ho, wo)
    parents = (x, w) if b is None else (x, w, b)
    if b is not None:
        out = out + b.data.reshape(1, o, 1, 1)

    def back(g):
        g2 = g.reshape(bsz, o, ho * wo)
        gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = np.matmul(w2.T, g2)
            gxp = _kernels.col2im(gcols, c, xp.shape[2], xp.shape[3], k, stride, ho, wo)
            gx = gxp[:, :, p : p + h, p : p + wd]
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2, 3))

    return Tensor(out, parents=parents, backward=back)


def conv_transpose2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 2, padding: int = 0,
                     output_padding: int = 0) -> Tensor:
    """Adjoint of :func:`conv2d`; ``w`` has shape (in_channels, out_channels, k, k).

    Output size is ``(n - 1) * stride - 2 * padding + k + output_padding``.
    """
    bsz, c, h, wd = x.shape
    ci, o, k, k2 = w.shape
    if ci != c or k != k2:
        raise GazeBenchError(f"conv_transpose2d: input {x.shape} incompatible with kernel {w.shape}")
    hf = (h - 1) * stride + k + output_padding
    wf = (wd - 1) * stride + k + output_padding
    p = padding
    ho, wo = hf - 2 * p, wf - 2 * p
    if ho < 1 or wo < 1:
        raise GazeBenchError("conv_transpose2d: padding leaves an empty output")
    w2 = w.data.reshape(c, o * k * k)
    x2 = x.data.reshape(bsz, c, h * wd)
    cols = np.matmul(w2.T, x2)
    full = _kernels.col2im(cols, o, hf, wf, k, stride, h, wd)
    out = full[:, :, p : p + ho, p : p + wo]
    if b is not None:
        out = out + b.data.reshape(1, o, 1, 1)
    parents = (x, w) if b is None else (x, w, b)

    def back(g):
        gfull = np.zeros((bsz, o, hf, wf))
        gfull[:, :, p : p + ho, p : p + wo] = g
        gcols = _kernels.im2col(gfull, k, stride, h, wd)
        gx = np.matmul(w2, gcols).reshape(x.shape) if x.requires_grad else None
        gw = np.matmul(x2, gcols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape) if w.requires_grad else None
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2, 3))

    return Tensor(np.ascontiguousarray(out), parents=parents, backward=back)
