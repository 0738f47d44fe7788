"""Adaptive-moment optimizer with decoupled weight decay, plus the
warmup + cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from shelfdex.errors import ConfigError
from shelfdex.numkit.params import ParamStore


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def optimizer_step(
    store: ParamStore,
    lr: float,
    weight_decay: float,
    state: AdamState,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """One update over every parameter. Decay is decoupled: it scales the
    parameter directly and never enters the moment estimates."""
    if lr < 0:
        raise ConfigError(f"negative learning rate {lr}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in store.items():
        g = store.grad(name)
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        else:
            v = state.v[name]
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        p.data = p.data - lr * update - lr * weight_decay * p.data
    return state


@dataclass(frozen=True)
class LrSchedule:
    base_lr: float = 1e-4
    warmup_steps: int = 2000
    total_steps: int = 100_000

    def __post_init__(self):
        if self.total_steps <= self.warmup_steps:
            raise ConfigError(
                f"total_steps {self.total_steps} must exceed warmup_steps {self.warmup_steps}"
            )
        if self.base_lr < 0:
            raise ConfigError("base_lr must be >= 0")


def lr_at(sched: LrSchedule, step: int) -> float:
    """Linear ramp 0 -> base_lr over the warmup, cosine decay to 0 at the end."""
    if step > sched.total_steps:
        raise ConfigError(f"step {step} beyond total_steps {sched.total_steps}")
    if step < sched.warmup_steps:
        return sched.base_lr * step / sched.warmup_steps
    frac = (step - sched.warmup_steps) / (sched.total_steps - sched.warmup_steps)
    return sched.base_lr * 0.5 * (1.0 + math.cos(math.pi * frac))
