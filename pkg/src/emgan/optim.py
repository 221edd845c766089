"""ADAM and plain SGD updates over a :class:`~emgan.tensor.ParamSet`.

Updates replace each parameter's array instead of writing into it, so graphs
built before the step keep the values they were computed with.  Callers are
responsible for zeroing gradients.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingGradient

# settings from the adversarial training runs: lr 0.002, beta1 0.5
ADAM_LR = 0.002
ADAM_BETA1 = 0.5
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    lr: float = ADAM_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, **hyper):
        state = cls(**hyper)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state

    def copy(self):
        return AdamState(self.lr, self.beta1, self.beta2, self.eps, self.t,
                         {k: a.copy() for k, a in self.m.items()},
                         {k: a.copy() for k, a in self.v.items()})


def _require_grads(params):
    missing = [name for name, p in params.items() if p.grad is None]
    if missing:
        raise MissingGradient(f"no gradient for parameter(s): {', '.join(missing[:5])}")


def adam_step(state, params):
    """One bias-corrected ADAM update; returns ``(params, state)``."""
    _require_grads(params)
    if not state.m:
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = p.grad
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        state.m[name], state.v[name] = m, v
        p.data = p.data - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def sgd_step(params, lr):
    _require_grads(params)
    for p in params.values():
        p.data = p.data - lr * p.grad
    return params
