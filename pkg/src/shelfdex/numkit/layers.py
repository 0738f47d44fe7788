"""The layer set the policy is built from: linear, layer norm, multi-head
attention, and GELU. All differentiable through the Tensor tape."""

from __future__ import annotations

import numpy as np

from shelfdex.errors import DimensionError
from shelfdex.numkit.tensor import Tensor, _lift

__all__ = ["linear", "layer_norm", "gelu", "softmax", "multi_head_attention"]


def linear(x, w, b=None) -> Tensor:
    """y = x @ w (+ b). x: (..., Din), w: (Din, Dout), b: (Dout,)."""
    x, w = _lift(x), _lift(w)
    if x.data.shape[-1] != w.data.shape[0]:
        raise DimensionError(
            f"linear: x last dim {x.data.shape[-1]} != w first dim {w.data.shape[0]}"
        )
    y = x @ w
    if b is not None:
        y = y + _lift(b)
    return y


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x, gamma, beta = _lift(x), _lift(gamma), _lift(beta)
    d = x.data.shape[-1]
    if d == 0:
        raise DimensionError("layer_norm: zero-width rows")
    if eps <= 0:
        raise DimensionError("layer_norm: eps must be > 0")

    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = xhat * gamma.data + beta.data

    def bwd(g):
        if gamma.requires_grad:
            gamma._accum((g * xhat).sum(axis=tuple(range(g.ndim - 1))))
        if beta.requires_grad:
            beta._accum(g.sum(axis=tuple(range(g.ndim - 1))))
        if x.requires_grad:
            gh = g * gamma.data
            # d/dx of (x - mu) * inv with mu, inv functions of x
            m1 = gh.mean(axis=-1, keepdims=True)
            m2 = (gh * xhat).mean(axis=-1, keepdims=True)
            x._accum(inv * (gh - m1 - xhat * m2))

    return Tensor._from_op(out_data, (x, gamma, beta), bwd)


def gelu(x) -> Tensor:
    return _lift(x).gelu()


def softmax(x, axis: int = -1) -> Tensor:
    return _lift(x).softmax(axis=axis)


def multi_head_attention(
    q,
    k,
    v,
    heads: int,
    wq=None,
    wk=None,
    wv=None,
    wo=None,
    return_weights: bool = False,
):
    """Scaled dot-product attention, per head, concatenated and projected.

    q: (..., Nq, D); k, v: (..., Nk, D). Projections default to identity so
    the bare primitive can be tested directly; the policy passes real weights.
    Returned attention weights (if requested) have shape (..., heads, Nq, Nk)
    and each row sums to 1.
    """
    q, k, v = _lift(q), _lift(k), _lift(v)
    d = q.data.shape[-1]
    if d % heads != 0:
        raise DimensionError(f"attention: width {d} not divisible by {heads} heads")
    if k.data.shape[-2] < 1:
        raise DimensionError("attention: need at least one key")
    if k.data.shape[-2] != v.data.shape[-2]:
        raise DimensionError("attention: key/value counts differ")

    if wq is not None:
        q = linear(q, wq)
    if wk is not None:
        k = linear(k, wk)
    if wv is not None:
        v = linear(v, wv)

    dh = q.data.shape[-1] // heads
    nq, nk = q.data.shape[-2], k.data.shape[-2]
    lead = q.data.shape[:-2]

    def split_heads(t, n):
        t = t.reshape(lead + (n, heads, dh))
        axes = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
        return t.transpose(axes)  # (..., heads, n, dh)

    qh = split_heads(q, nq)
    kh = split_heads(k, nk)
    vh = split_heads(v, nk)

    scores = (qh @ kh.transpose(_swap_axes(qh.data.ndim))) * (1.0 / np.sqrt(dh))
    weights = scores.softmax(axis=-1)
    ctx = weights @ vh  # (..., heads, nq, dh)

    axes_back = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
    out = ctx.transpose(axes_back).reshape(lead + (nq, heads * dh))
    if wo is not None:
        out = linear(out, wo)
    if return_weights:
        return out, weights
    return out


def _swap_axes(ndim: int) -> tuple:
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)
