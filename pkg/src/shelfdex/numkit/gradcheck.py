"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from shelfdex.errors import ConfigError, NumericError
from shelfdex.numkit.params import ParamStore

SUBSAMPLE_THRESHOLD = 10_000


def grad_check(
    f,
    store: ParamStore,
    fd_eps: float = 1e-5,
    seed: int = 0,
    max_entries: int = SUBSAMPLE_THRESHOLD,
) -> float:
    """Worst relative error between reverse-mode and central finite differences.

    f must be a deterministic scalar Tensor function of the store. Above
    SUBSAMPLE_THRESHOLD total entries, a seeded random subsample of
    max_entries parameter entries is checked instead of all of them.
    Relative error uses denominator max(|a|, |b|, 1e-8).
    """
    if not (1e-7 <= fd_eps <= 1e-3):
        raise ConfigError(f"fd_eps {fd_eps} outside [1e-7, 1e-3]")

    store.zero_grad()
    out = f(store)
    y0 = float(out.data)
    if not np.isfinite(y0):
        raise NumericError("objective is non-finite")
    out.backward()
    analytic = {name: store.grad(name).copy() for name in store.names()}

    entries = [
        (name, idx)
        for name in store.names()
        for idx in range(store[name].data.size)
    ]
    if len(entries) > SUBSAMPLE_THRESHOLD:
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(entries), size=min(max_entries, len(entries)), replace=False)
        entries = [entries[i] for i in sorted(picks)]

    def eval_at() -> float:
        store.zero_grad()
        val = float(f(store).data)
        if not np.isfinite(val):
            raise NumericError("objective is non-finite during finite differencing")
        return val

    worst = 0.0
    for name, idx in entries:
        flat = store[name].data.reshape(-1)
        keep = flat[idx]
        flat[idx] = keep + fd_eps
        y_plus = eval_at()
        flat[idx] = keep - fd_eps
        y_minus = eval_at()
        flat[idx] = keep
        fd = (y_plus - y_minus) / (2.0 * fd_eps)
        a = analytic[name].reshape(-1)[idx]
        rel = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
        if rel > worst:
            worst = rel
    return worst
