"""Central finite-difference verification of analytic gradients.

The harness perturbs every coordinate of every input, so it is meant for
the small tensors used in tests, where 64-bit central differences resolve
relative errors well below 1e-6 for smooth kernels.
"""
from __future__ import annotations

import numpy as np

#: Absolute floor on the denominator of the relative error.
ERROR_FLOOR = 1e-8


def finite_difference_check(fn, inputs, h: float = 1e-6) -> float:
    """Max relative error between analytic and numeric gradients.

    ``fn(*inputs)`` must return ``(scalar_value, grads)`` with one gradient
    array per input. Each coordinate is probed with a central difference of
    step ``h``; the relative error is |analytic - numeric| normalized by
    max(|numeric|, ERROR_FLOOR).
    """
    inputs = [np.asarray(a, dtype=np.float64) for a in inputs]
    _, grads = fn(*inputs)
    if len(grads) != len(inputs):
        raise ValueError("finite_difference_check: one gradient per input expected")

    worst = 0.0
    for idx, base in enumerate(inputs):
        analytic = np.asarray(grads[idx], dtype=np.float64)
        if analytic.shape != base.shape:
            raise ValueError(
                f"finite_difference_check: grad {idx} shape {analytic.shape}"
                f" != input shape {base.shape}"
            )
        flat = base.reshape(-1)
        for coord in range(flat.size):
            orig = flat[coord]
            flat[coord] = orig + h
            f_plus = fn(*inputs)[0]
            flat[coord] = orig - h
            f_minus = fn(*inputs)[0]
            flat[coord] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            err = abs(analytic.reshape(-1)[coord] - numeric) / max(
                abs(numeric), ERROR_FLOOR
            )
            worst = max(worst, err)
    return worst
