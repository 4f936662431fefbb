from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericError


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros_like(cls, arrays) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], 0)


def adam_step(params: list, grads: list, state: AdamState, lr: float = 3e-4,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              names: list | None = None) -> AdamState:
    """In-place Adam update of ``params`` with bias-corrected moments."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise NumericError("parameter, gradient and moment lists differ in length")
    for i, g in enumerate(grads):
        if g.shape != params[i].shape:
            raise NumericError(f"gradient {i} has shape {g.shape}, parameter {params[i].shape}")
        bad = ~np.isfinite(g)
        if bad.any():
            label = names[i] if names else f"#{i}"
            first = np.argwhere(bad)[0].tolist()
            raise NumericError(
                f"non-finite gradient in {label}: {int(bad.sum())} of {g.size} entries, "
                f"first at index {first} (value {g[tuple(first)]})"
            )
    state.step += 1
    c1 = 1.0 - beta1**state.step
    c2 = 1.0 - beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state
