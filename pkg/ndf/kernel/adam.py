"""
Adam with bias correction.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ndf.errors import NumericalError, UsageError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def create(cls, params: Sequence[np.ndarray], lr: float = 1e-3, **kwargs) -> 'AdamState':
        return cls(lr=lr, m=[np.zeros(p.shape) for p in params], v=[np.zeros(p.shape) for p in params], **kwargs)


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> List[np.ndarray]:
    """One update; returns new parameter arrays in their original dtypes."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise UsageError("Parameter, gradient and optimizer state counts differ")
    for k, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"Non-finite gradient in parameter group {k} at step {state.step + 1}",
                                 payload={'group': k, 'step': state.step + 1})
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    updated = []
    for k, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=np.float64).reshape(p.shape)
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        step = state.lr * (state.m[k] / c1) / (np.sqrt(state.v[k] / c2) + state.eps)
        updated.append((np.asarray(p, dtype=np.float64) - step).astype(p.dtype))
    return updated
