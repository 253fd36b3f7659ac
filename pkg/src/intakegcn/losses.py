"""Frame-labeling losses: masked cross-entropy plus a truncated-MSE
smoothness penalty on adjacent log-probabilities.

The smoothing term discourages oversegmented predictions: squared
frame-to-frame changes of the per-class log-probability are clipped at
tau and averaged, and the previous frame is treated as a constant so the
gradient only pulls the current frame toward it.
"""
from __future__ import annotations

import numpy as np


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray):
    """Mean negative log-likelihood over unmasked frames.

    logits: (N, T, C); labels: integer (N, T); mask: boolean (N, T) with
    True on frames that count. Returns (loss, probabilities, vjp) where
    vjp(g) gives the gradient on the logits.
    """
    n, t, c = logits.shape
    if labels.shape != (n, t) or mask.shape != (n, t):
        raise ValueError("softmax_cross_entropy: labels/mask shape mismatch")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError("softmax_cross_entropy: labels out of range")
    count = int(mask.sum())
    if count == 0:
        raise ValueError("softmax_cross_entropy: all frames masked")

    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=-1, keepdims=True)
    log_probs = shifted - np.log(exp.sum(axis=-1, keepdims=True))

    picked = np.take_along_axis(log_probs, labels[:, :, None], axis=2)[:, :, 0]
    loss = -(picked * mask).sum() / count

    def vjp(g=1.0):
        onehot = np.zeros_like(logits)
        np.put_along_axis(onehot, labels[:, :, None], 1.0, axis=2)
        return g * (probs - onehot) * mask[:, :, None] / count

    return loss, probs, vjp


def truncated_mse_smoothing(log_probs: np.ndarray, tau: float, mask: np.ndarray):
    """Mean of min(tau, |log p_t - log p_{t-1}|)^2 over classes and
    adjacent frame pairs where both frames are unmasked.

    Gradient flows through the current frame only; clipped pairs
    contribute a constant and therefore no gradient.
    """
    if tau <= 0:
        raise ValueError("truncated_mse_smoothing: tau must be > 0")
    n, t, c = log_probs.shape
    if t < 2:
        raise ValueError("truncated_mse_smoothing: needs T >= 2")
    if mask.shape != (n, t):
        raise ValueError("truncated_mse_smoothing: mask shape mismatch")

    delta = log_probs[:, 1:, :] - log_probs[:, :-1, :]
    pair_mask = (mask[:, 1:] & mask[:, :-1])[:, :, None]
    count = int(pair_mask.sum()) * c
    if count == 0:
        return 0.0, lambda g=1.0: np.zeros_like(log_probs)

    clipped = np.minimum(delta**2, tau**2)
    loss = (clipped * pair_mask).sum() / count

    def vjp(g=1.0):
        active = (np.abs(delta) < tau) & pair_mask
        glp = np.zeros_like(log_probs)
        glp[:, 1:, :] = g * 2.0 * delta * active / count
        return glp

    return loss, vjp
