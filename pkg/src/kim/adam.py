"""Adam with bias correction over named parameter dicts."""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamState", "adam_step"]


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, values: dict, grads: dict, lr: float):
    """One update of every key in `grads`; other values pass through.

    Returns (new state, new values). Scalars stay floats, vectors stay
    arrays. Moments for unseen keys start at zero.
    """
    t = state.t + 1
    new_m, new_v = dict(state.m), dict(state.v)
    out = dict(values)
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, g in grads.items():
        g = np.asarray(g, dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for '{name}'")
        m = state.beta1 * new_m.get(name, 0.0) + (1.0 - state.beta1) * g
        v = state.beta2 * new_v.get(name, 0.0) + (1.0 - state.beta2) * g * g
        new_m[name], new_v[name] = m, v
        step = lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        theta = np.asarray(values[name], dtype=np.float64) - step
        out[name] = theta if theta.shape else float(theta)
    next_state = AdamState(state.beta1, state.beta2, state.eps, t,
                           new_m, new_v)
    return next_state, out
