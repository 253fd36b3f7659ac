"""Trainable parameter container and the Adam update."""
from __future__ import annotations

import numpy as np


class Param:
    """A named trainable tensor with its gradient and Adam state.

    Moment buffers are allocated lazily on the first optimizer step, so
    inference-only parameter sets stay at one array per tensor.
    """

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.adam_m: np.ndarray | None = None
        self.adam_v: np.ndarray | None = None
        self.step_count = 0

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Param({self.name!r}, shape={self.value.shape})"


def adam_step(
    param: Param,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Param:
    """One Adam update with bias correction; the gradient is left for the
    caller to zero."""
    if lr <= 0:
        raise ValueError("adam_step: lr must be > 0")
    if param.adam_m is None:
        param.adam_m = np.zeros_like(param.value)
        param.adam_v = np.zeros_like(param.value)

    param.step_count += 1
    t = param.step_count
    g = param.grad
    param.adam_m *= beta1
    param.adam_m += (1.0 - beta1) * g
    param.adam_v *= beta2
    param.adam_v += (1.0 - beta2) * g * g
    m_hat = param.adam_m / (1.0 - beta1**t)
    v_hat = param.adam_v / (1.0 - beta2**t)
    param.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return param
