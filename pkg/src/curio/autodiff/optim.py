from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **hyper) -> "AdamState":
        st = cls(**hyper)
        st.first_moment = [np.zeros_like(p.data if hasattr(p, "data") else p) for p in params]
        st.second_moment = [np.zeros_like(m) for m in st.first_moment]
        return st

    def copy(self) -> "AdamState":
        return AdamState(self.learning_rate, self.beta1, self.beta2, self.eps, self.step_count,
                         [m.copy() for m in self.first_moment],
                         [v.copy() for v in self.second_moment])


def adam_step(weights, grads, state: AdamState):
    """One bias-corrected Adam update.

    ``weights`` and ``grads`` are lists of arrays; returns new arrays and a new
    state, leaving the inputs untouched.
    """
    if len(weights) != len(grads):
        raise ValueError("weights and grads differ in length")
    st = state.copy()
    if not st.first_moment:
        st.first_moment = [np.zeros_like(w) for w in weights]
        st.second_moment = [np.zeros_like(w) for w in weights]
    st.step_count += 1
    t = st.step_count
    c1 = 1.0 - st.beta1 ** t
    c2 = 1.0 - st.beta2 ** t
    out = []
    for i, (w, g) in enumerate(zip(weights, grads)):
        if w.shape != g.shape:
            raise ValueError(f"parameter {i}: shape {w.shape} vs gradient {g.shape}")
        m = st.beta1 * st.first_moment[i] + (1.0 - st.beta1) * g
        v = st.beta2 * st.second_moment[i] + (1.0 - st.beta2) * g * g
        st.first_moment[i] = m
        st.second_moment[i] = v
        out.append(w - st.learning_rate * (m / c1) / (np.sqrt(v / c2) + st.eps))
    return out, st


class Adam:
    """In-place Adam over a list of parameter Tensors."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = AdamState.for_params(self.params, learning_rate=lr, beta1=beta1,
                                          beta2=beta2, eps=eps)

    def step(self, grads=None):
        if grads is None:
            grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        new, self.state = adam_step([p.data for p in self.params], grads, self.state)
        for p, w in zip(self.params, new):
            p.data = w

    def zero_grad(self):
        for p in self.params:
            p.grad = None
