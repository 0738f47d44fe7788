"""Differentiable numerics: float64 tensors with reverse-mode gradients,
the transformer layer set, AdamW-style updates, and the LR schedule."""

from shelfdex.numkit.gradcheck import grad_check
from shelfdex.numkit.layers import (
    gelu,
    layer_norm,
    linear,
    multi_head_attention,
    softmax,
)
from shelfdex.numkit.optim import AdamState, LrSchedule, lr_at, optimizer_step
from shelfdex.numkit.params import ParamStore
from shelfdex.numkit.tensor import Tensor, concatenate, set_debug_checks, stack

__all__ = [
    "Tensor",
    "ParamStore",
    "AdamState",
    "LrSchedule",
    "concatenate",
    "stack",
    "linear",
    "layer_norm",
    "gelu",
    "softmax",
    "multi_head_attention",
    "optimizer_step",
    "lr_at",
    "grad_check",
    "set_debug_checks",
]
