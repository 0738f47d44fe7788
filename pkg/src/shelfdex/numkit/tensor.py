"""Reverse-mode autodiff over dense float64 numpy arrays.

Each op records its parents and a backward closure; ``backward()`` does a
topological sweep accumulating adjoints. Everything is float64: desk scale
makes speed a non-issue and keeps finite-difference checks tight.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf

from shelfdex.errors import DimensionError, NumericError

_CHECK_FINITE = False

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def set_debug_checks(enabled: bool) -> None:
    """Enable per-op NaN/Inf validation (slow; used by the test suite)."""
    global _CHECK_FINITE
    _CHECK_FINITE = bool(enabled)


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = _as_array(data)
        if not np.all(np.isfinite(self.data)):
            raise NumericError(f"non-finite values in tensor {name or '<anon>'}")
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None
        self.name = name

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _from_op(data: np.ndarray, parents, backward) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        if _CHECK_FINITE and not np.all(np.isfinite(data)):
            raise NumericError("non-finite values produced by an op")
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        out.name = ""
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def _accum(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            g = np.broadcast_to(g, self.data.shape)
        # closures never mutate adjoints after handing them off, so the first
        # accumulation may hold a reference instead of copying
        self.grad = g if self.grad is None else self.grad + g

    def backward(self) -> None:
        """Run reverse accumulation from this (scalar or any-shaped) tensor."""
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                # free the tape as we go; leaves keep their grads
                node._backward = None
                node._parents = ()

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other):
        other = _lift(other)
        a, b = self, other
        out_data = a.data + b.data

        def bwd(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g, b.data.shape))

        return Tensor._from_op(out_data, (a, b), bwd)

    __radd__ = __add__

    def __neg__(self):
        a = self

        def bwd(g):
            a._accum(-g)

        return Tensor._from_op(-a.data, (a,), bwd)

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) + (-self)

    def __mul__(self, other):
        other = _lift(other)
        a, b = self, other
        out_data = a.data * b.data

        def bwd(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g * a.data, b.data.shape))

        return Tensor._from_op(out_data, (a, b), bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _lift(other)
        a, b = self, other
        out_data = a.data / b.data

        def bwd(g):
            if a.requires_grad:
                a._accum(_unbroadcast(g / b.data, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

        return Tensor._from_op(out_data, (a, b), bwd)

    def __rtruediv__(self, other):
        return _lift(other) / self

    def __pow__(self, exponent: float):
        a = self
        e = float(exponent)
        out_data = a.data**e

        def bwd(g):
            a._accum(g * e * a.data ** (e - 1.0))

        return Tensor._from_op(out_data, (a,), bwd)

    def __matmul__(self, other):
        other = _lift(other)
        a, b = self, other
        if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
            raise DimensionError(
                f"matmul inner dims {a.data.shape} @ {b.data.shape}"
            )
        out_data = a.data @ b.data

        def bwd(g):
            if a.requires_grad:
                ga = g @ _swap(b.data) if b.data.ndim > 1 else np.outer(g, b.data)
                a._accum(_unbroadcast(ga, a.data.shape))
            if b.requires_grad:
                gb = _swap(a.data) @ g if a.data.ndim > 1 else np.outer(a.data, g)
                b._accum(_unbroadcast(gb, b.data.shape))

        return Tensor._from_op(out_data, (a, b), bwd)

    # -- shape ops ---------------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        old = a.data.shape
        out_data = a.data.reshape(shape)

        def bwd(g):
            a._accum(g.reshape(old))

        return Tensor._from_op(out_data, (a,), bwd)

    def transpose(self, axes):
        a = self
        axes = tuple(axes)
        inv = tuple(np.argsort(axes))
        out_data = np.ascontiguousarray(a.data.transpose(axes))

        def bwd(g):
            a._accum(np.ascontiguousarray(g.transpose(inv)))

        return Tensor._from_op(out_data, (a,), bwd)

    def __getitem__(self, idx):
        a = self
        out_data = a.data[idx]
        if np.isscalar(out_data):
            out_data = np.asarray(out_data)

        def bwd(g):
            full = np.zeros_like(a.data)
            full[idx] = g
            a._accum(full)

        return Tensor._from_op(np.ascontiguousarray(out_data), (a,), bwd)

    # -- reductions / pointwise ----------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        a = self
        out_data = a.data.sum(axis=axis, keepdims=keepdims)

        def bwd(g):
            gg = g
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            a._accum(np.broadcast_to(gg, a.data.shape))

        return Tensor._from_op(np.asarray(out_data), (a,), bwd)

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    def exp(self):
        a = self
        out_data = np.exp(a.data)

        def bwd(g):
            a._accum(g * out_data)

        return Tensor._from_op(out_data, (a,), bwd)

    def sqrt(self):
        a = self
        out_data = np.sqrt(a.data)

        def bwd(g):
            a._accum(g * 0.5 / out_data)

        return Tensor._from_op(out_data, (a,), bwd)

    def tanh(self):
        a = self
        out_data = np.tanh(a.data)

        def bwd(g):
            a._accum(g * (1.0 - out_data * out_data))

        return Tensor._from_op(out_data, (a,), bwd)

    def gelu(self):
        """Gaussian-error-unit activation, exact erf form (smooth everywhere)."""
        a = self
        x = a.data
        phi = 0.5 * (1.0 + _erf(x * _INV_SQRT2))
        out_data = x * phi

        def bwd(g):
            pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
            a._accum(g * (phi + x * pdf))

        return Tensor._from_op(out_data, (a,), bwd)

    def softmax(self, axis: int = -1):
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out_data = e / e.sum(axis=axis, keepdims=True)

        def bwd(g):
            dot = (g * out_data).sum(axis=axis, keepdims=True)
            a._accum(out_data * (g - dot))

        return Tensor._from_op(out_data, (a,), bwd)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _swap(arr: np.ndarray) -> np.ndarray:
    return arr.swapaxes(-1, -2)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward op."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def concatenate(tensors, axis: int = 0) -> Tensor:
    parts = [_lift(t) for t in tensors]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for p, piece in zip(parts, np.split(g, splits, axis=axis)):
            if p.requires_grad:
                p._accum(np.ascontiguousarray(piece))

    return Tensor._from_op(out_data, tuple(parts), bwd)


def stack(tensors, axis: int = 0) -> Tensor:
    parts = [_lift(t) for t in tensors]
    out_data = np.stack([p.data for p in parts], axis=axis)

    def bwd(g):
        for i, p in enumerate(parts):
            if p.requires_grad:
                p._accum(np.ascontiguousarray(np.take(g, i, axis=axis)))

    return Tensor._from_op(out_data, tuple(parts), bwd)
