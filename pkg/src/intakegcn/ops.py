"""Tensor kernels with analytic gradients.

Every kernel is a pure function returning ``(output, vjp)`` where ``vjp``
maps the gradient of a scalar loss w.r.t. the output back to gradients
w.r.t. the inputs, in argument order. All math is float64; finite values
in, finite values out is part of the contract. There is no autodiff graph:
callers compose the closures themselves.

Layout conventions follow the network description they serve: time series
are (N, C, T), skeleton feature maps (N, C, T, V), recurrent inputs
(N, T, F).
"""
from __future__ import annotations

import numpy as np

from .rng import RngStream


def dense(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Affine map over the trailing dimension: y = x @ w + b."""
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"dense: input dim {x.shape[-1]} != weight dim {w.shape[0]}")
    if b.shape != (w.shape[1],):
        raise ValueError(f"dense: bias shape {b.shape} != ({w.shape[1]},)")
    y = x @ w + b

    def vjp(gy):
        gx = gy @ w.T
        gw = x.reshape(-1, w.shape[0]).T @ gy.reshape(-1, w.shape[1])
        gb = gy.reshape(-1, w.shape[1]).sum(axis=0)
        return gx, gw, gb

    return y, vjp


def conv1d_dilated(x: np.ndarray, kernel: np.ndarray, dilation: int = 1):
    """Non-causal dilated 1-D convolution, stride 1, T preserved.

    x: (N, C_in, T); kernel: (C_out, C_in, K) with K odd. Symmetric zero
    padding of dilation*(K-1)/2 keeps the output centered on the input, so
    every frame sees both past and future context.
    """
    if x.ndim != 3 or kernel.ndim != 3:
        raise ValueError("conv1d_dilated: expected x (N, C, T) and kernel (O, C, K)")
    n, c_in, t = x.shape
    c_out, kc, k = kernel.shape
    if kc != c_in:
        raise ValueError(f"conv1d_dilated: channel mismatch {kc} != {c_in}")
    if k % 2 == 0:
        raise ValueError("conv1d_dilated: kernel size must be odd")
    if dilation < 1:
        raise ValueError("conv1d_dilated: dilation must be >= 1")

    pad = dilation * (k - 1) // 2
    xpad = np.zeros((n, c_in, t + 2 * pad), dtype=x.dtype)
    xpad[:, :, pad : pad + t] = x

    # contiguous per-tap kernel slices; matmul on strided views is slow
    taps = [np.ascontiguousarray(kernel[:, :, j]) for j in range(k)]
    y = np.zeros((n, c_out, t), dtype=x.dtype)
    for j in range(k):
        y += np.matmul(taps[j], xpad[:, :, j * dilation : j * dilation + t])

    def vjp(gy):
        gk = np.empty_like(kernel)
        gxpad = np.zeros_like(xpad)
        for j in range(k):
            sl = slice(j * dilation, j * dilation + t)
            gk[:, :, j] = np.tensordot(gy, xpad[:, :, sl], axes=([0, 2], [0, 2]))
            gxpad[:, :, sl] += np.matmul(taps[j].T, gy)
        gx = gxpad[:, :, pad : pad + t]
        return gx, gk

    return y, vjp


def batch_norm(
    x: np.ndarray,
    scale: np.ndarray,
    shift: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    mode: str,
    momentum: float = 0.1,
    eps: float = 1e-5,
):
    """Per-channel normalization of (N, C, T, V) over the (N, T, V) axes.

    Train mode normalizes with batch statistics and updates the running
    buffers in place; infer mode uses the running buffers only, making
    inference independent of batch composition. Biased variance is used
    both for normalization and for the running update.
    """
    if eps <= 0:
        raise ValueError("batch_norm: eps must be > 0")
    if x.ndim != 4:
        raise ValueError("batch_norm: expected (N, C, T, V) input")
    if mode not in ("train", "infer"):
        raise ValueError(f"batch_norm: unknown mode {mode!r}")

    axes = (0, 2, 3)
    m = x.shape[0] * x.shape[2] * x.shape[3]
    if mode == "train":
        if m < 2:
            raise ValueError("batch_norm: train mode needs N*T*V >= 2")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mean = running_mean
        var = running_var

    invstd = 1.0 / np.sqrt(var + eps)
    xc = x - mean[None, :, None, None]
    xhat = xc * invstd[None, :, None, None]
    y = scale[None, :, None, None] * xhat + shift[None, :, None, None]

    def vjp(gy):
        gscale = (gy * xhat).sum(axis=axes)
        gshift = gy.sum(axis=axes)
        gxhat = gy * scale[None, :, None, None]
        if mode == "infer":
            gx = gxhat * invstd[None, :, None, None]
            return gx, gscale, gshift
        # batch statistics depend on x, so mean/var terms enter the gradient
        gvar = (gxhat * xc).sum(axis=axes) * (-0.5) * invstd**3
        gmean = -(gxhat.sum(axis=axes)) * invstd + gvar * (-2.0 / m) * xc.sum(axis=axes)
        gx = (
            gxhat * invstd[None, :, None, None]
            + (2.0 / m) * gvar[None, :, None, None] * xc
            + gmean[None, :, None, None] / m
        )
        return gx, gscale, gshift

    return y, vjp


def relu(x: np.ndarray):
    """Elementwise max(0, x); subgradient 0 at the kink."""
    y = np.maximum(x, 0.0)
    mask = x > 0

    def vjp(gy):
        return (gy * mask,)

    return y, vjp


def dropout(x: np.ndarray, rate: float, stream: RngStream, mode: str):
    """Inverted dropout: train zeroes with probability ``rate`` and scales
    survivors by 1/(1-rate); infer is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout: rate must be in [0, 1)")
    if mode == "infer" or rate == 0.0:
        return x, lambda gy: (gy,)

    keep = stream.keep_mask(rate, x.shape)
    inv = 1.0 / (1.0 - rate)
    y = np.where(keep, x * inv, 0.0)

    def vjp(gy):
        return (np.where(keep, gy * inv, 0.0),)

    return y, vjp


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(x: np.ndarray, wx: np.ndarray, wh: np.ndarray, b: np.ndarray):
    """Single-direction LSTM over (N, T, F) with zero initial states.

    Gates are packed (input, forget, candidate, output) along the trailing
    4H axis: sigmoid on i/f/o, tanh on the candidate. Returns hidden states
    (N, T, H) and a full backpropagation-through-time vjp.
    """
    x = np.ascontiguousarray(x)  # reversed views would hit slow matmul paths
    n, t, f = x.shape
    fourh = wx.shape[1]
    h_dim = fourh // 4
    if h_dim <= 0 or fourh != 4 * h_dim:
        raise ValueError("lstm_forward: hidden size must be positive")
    if wx.shape != (f, fourh) or wh.shape != (h_dim, fourh) or b.shape != (fourh,):
        raise ValueError("lstm_forward: parameter shapes inconsistent")

    xw = x @ wx  # (N, T, 4H), the input contribution for every step at once
    hs = np.zeros((n, t, h_dim))
    cs = np.zeros((n, t, h_dim))
    gates = np.zeros((n, t, fourh))
    tanh_c = np.zeros((n, t, h_dim))

    h = np.zeros((n, h_dim))
    c = np.zeros((n, h_dim))
    for step in range(t):
        z = xw[:, step] + h @ wh + b
        i = _sigmoid(z[:, :h_dim])
        fg = _sigmoid(z[:, h_dim : 2 * h_dim])
        g = np.tanh(z[:, 2 * h_dim : 3 * h_dim])
        o = _sigmoid(z[:, 3 * h_dim :])
        c = fg * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gates[:, step] = np.concatenate([i, fg, g, o], axis=1)
        cs[:, step] = c
        tanh_c[:, step] = tc
        hs[:, step] = h

    def vjp(gy):
        gx = np.zeros_like(x)
        gwx = np.zeros_like(wx)
        gwh = np.zeros_like(wh)
        gb = np.zeros_like(b)
        gh_next = np.zeros((n, h_dim))
        gc_next = np.zeros((n, h_dim))
        for step in range(t - 1, -1, -1):
            i = gates[:, step, :h_dim]
            fg = gates[:, step, h_dim : 2 * h_dim]
            g = gates[:, step, 2 * h_dim : 3 * h_dim]
            o = gates[:, step, 3 * h_dim :]
            tc = tanh_c[:, step]
            c_prev = cs[:, step - 1] if step > 0 else np.zeros((n, h_dim))
            h_prev = hs[:, step - 1] if step > 0 else np.zeros((n, h_dim))

            gh = gy[:, step] + gh_next
            go = gh * tc
            gc = gh * o * (1.0 - tc**2) + gc_next
            gi = gc * g
            gf = gc * c_prev
            gg = gc * i
            gc_next = gc * fg

            gz = np.concatenate(
                [
                    gi * i * (1.0 - i),
                    gf * fg * (1.0 - fg),
                    gg * (1.0 - g**2),
                    go * o * (1.0 - o),
                ],
                axis=1,
            )
            gx[:, step] = gz @ wx.T
            gwx += x[:, step].T @ gz
            gwh += h_prev.T @ gz
            gb += gz.sum(axis=0)
            gh_next = gz @ wh.T
        return gx, gwx, gwh, gb

    return hs, vjp


def bilstm_forward(
    x: np.ndarray,
    wx_f: np.ndarray,
    wh_f: np.ndarray,
    b_f: np.ndarray,
    wx_b: np.ndarray,
    wh_b: np.ndarray,
    b_b: np.ndarray,
):
    """Bidirectional LSTM: forward pass over t=0..T-1, backward pass over
    the reversed sequence, hidden states concatenated per step to (N, T, 2H).
    """
    h_dim = wh_f.shape[0]
    y_f, vjp_f = lstm_forward(x, wx_f, wh_f, b_f)
    y_b_rev, vjp_b = lstm_forward(x[:, ::-1], wx_b, wh_b, b_b)
    y = np.concatenate([y_f, y_b_rev[:, ::-1]], axis=2)

    def vjp(gy):
        gx_f, gwx_f, gwh_f, gb_f = vjp_f(np.ascontiguousarray(gy[:, :, :h_dim]))
        gx_b, gwx_b, gwh_b, gb_b = vjp_b(np.ascontiguousarray(gy[:, ::-1, h_dim:]))
        gx = gx_f + gx_b[:, ::-1]
        return gx, gwx_f, gwh_f, gb_f, gwx_b, gwh_b, gb_b

    return y, vjp


def log_softmax(logits: np.ndarray):
    """Stable log-softmax over the trailing axis."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    y = shifted - lse

    def vjp(gy):
        probs = np.exp(y)
        return (gy - probs * gy.sum(axis=-1, keepdims=True),)

    return y, vjp
