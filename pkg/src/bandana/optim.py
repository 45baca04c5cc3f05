"""Adam with bias correction and decoupled weight decay."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class NonFiniteGradient(RuntimeError):
    """A gradient contained NaN or infinity; the step was aborted."""


class AdamState:
    """First/second moment buffers and step counter for one parameter."""

    __slots__ = ("m", "v", "step")

    def __init__(self, shape):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.step = 0


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              weight_decay: float = 0.0) -> np.ndarray:
    """One Adam update; returns the new parameter value.

    Weight decay is decoupled: applied as ``param -= lr * wd * param``
    before the moment update, outside the Adam machinery.
    """
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradient("non-finite gradient encountered")
    if weight_decay:
        param = param - lr * weight_decay * param
    state.step += 1
    state.m = beta1 * state.m + (1 - beta1) * grad
    state.v = beta2 * state.v + (1 - beta2) * grad * grad
    m_hat = state.m / (1 - beta1 ** state.step)
    v_hat = state.v / (1 - beta2 ** state.step)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Convenience wrapper applying adam_step to a set of Tensors.

    ``decay_params`` selects which tensors receive weight decay (by
    identity); the rest are updated without it.
    """

    def __init__(self, params: list[Tensor], lr: float, weight_decay: float = 0.0,
                 decay_params: list[Tensor] | None = None,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        decay_ids = {id(p) for p in (decay_params if decay_params is not None else params)}
        self._decay = [id(p) in decay_ids for p in params]
        self._states = [AdamState(p.data.shape) for p in params]

    def step(self) -> None:
        for p, state, decays in zip(self.params, self._states, self._decay):
            if p.grad is None:
                continue
            wd = self.weight_decay if decays else 0.0
            p.data = adam_step(p.data, p.grad, state, self.lr,
                               self.beta1, self.beta2, self.eps, wd)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
