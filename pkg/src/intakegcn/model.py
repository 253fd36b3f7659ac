"""The dilated spatial-temporal graph network with a BiLSTM head.

Ten graph/temporal blocks turn a (N, T, V, 3) keypoint window into
(N, 256, T, V) features, which are flattened per frame, refined by a
bidirectional LSTM and mapped to per-frame class logits by three dense
layers. Each block applies, in order: partitioned graph convolution with
a trainable edge-importance mask, batch norm, ReLU, dropout, dilated
temporal convolution, batch norm, a residual connection, and a final ReLU.

Forward functions return ``(output, back)``; calling ``back`` accumulates
gradients into the Param registry, so the training step is a plain
forward -> loss -> back -> Adam sequence.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import losses, ops
from .graph import PartitionedAdjacency
from .optim import Param, adam_step
from .rng import RngStream

# Default block table: channel widths, temporal dilations and dropout rates
# for the ten blocks of the full network.
DEFAULT_CHANNELS = (64, 64, 64, 64, 128, 128, 128, 256, 256, 256)
DEFAULT_DILATIONS = (1, 1, 2, 2, 4, 4, 8, 8, 16, 16)
DEFAULT_DROPOUTS = (0.15, 0.15, 0.15, 0.15, 0.15, 0.3, 0.3, 0.3, 0.3, 0.3)

DILATED_KERNEL = 3
BASIC_KERNEL = 9


@dataclass(frozen=True)
class BlockConfig:
    out_channels: int
    dilation: int
    dropout_rate: float
    temporal_kernel: int = DILATED_KERNEL


@dataclass
class ModelConfig:
    blocks: list[BlockConfig]
    vertex_count: int = 23
    in_channels: int = 3
    class_count: int = 3
    bilstm_hidden: int = 256
    dense_widths: tuple[int, int] = (128, 128)
    tcn_mode: str = "dilated"
    smoothing_lambda: float = 0.15
    smoothing_tau: float = 4.0
    learn_edge_importance: bool = True
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def validate(self) -> None:
        if self.tcn_mode not in ("basic", "dilated"):
            raise ValueError(f"unknown tcn_mode {self.tcn_mode!r}")
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")
        if self.bilstm_hidden <= 0:
            raise ValueError("bilstm_hidden must be positive")
        for i, blk in enumerate(self.blocks):
            if blk.out_channels <= 0:
                raise ValueError(f"block {i}: out_channels must be positive")
            if blk.dilation < 1:
                raise ValueError(f"block {i}: dilation must be >= 1")
            if not 0.0 <= blk.dropout_rate < 1.0:
                raise ValueError(f"block {i}: dropout_rate must be in [0, 1)")
            if blk.temporal_kernel % 2 == 0:
                raise ValueError(f"block {i}: temporal kernel must be odd")
            if self.tcn_mode == "basic" and blk.dilation != 1:
                raise ValueError("basic mode requires all dilations = 1")

    @property
    def feature_width(self) -> int:
        """Flattened per-frame feature size after the block stack."""
        return self.blocks[-1].out_channels * self.vertex_count


def make_blocks(channels, dilations, dropouts, temporal_kernel: int):
    if not len(channels) == len(dilations) == len(dropouts):
        raise ValueError("channels/dilations/dropouts must have equal length")
    return [
        BlockConfig(c, d, p, temporal_kernel)
        for c, d, p in zip(channels, dilations, dropouts)
    ]


def default_config(
    tcn_mode: str = "dilated",
    vertex_count: int = 23,
    temporal_kernel: int | None = None,
    **overrides,
) -> ModelConfig:
    """The full 10-block configuration.

    Basic mode keeps the channel table but forces every dilation to 1 and
    widens the temporal kernel (9 unless overridden), mirroring a plain
    fixed-kernel temporal convolution with the same block layout.
    """
    if tcn_mode == "dilated":
        kernel = DILATED_KERNEL if temporal_kernel is None else temporal_kernel
        dilations = DEFAULT_DILATIONS
    else:
        kernel = BASIC_KERNEL if temporal_kernel is None else temporal_kernel
        dilations = (1,) * len(DEFAULT_CHANNELS)
    blocks = make_blocks(DEFAULT_CHANNELS, dilations, DEFAULT_DROPOUTS, kernel)
    cfg = ModelConfig(
        blocks=blocks, vertex_count=vertex_count, tcn_mode=tcn_mode, **overrides
    )
    cfg.validate()
    return cfg


class ModelParams:
    """Named registry of trainable tensors plus non-trainable buffers
    (batch-norm running statistics)."""

    def __init__(self):
        self.params: dict[str, Param] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.frozen: set[str] = set()

    def add(self, name: str, value: np.ndarray) -> Param:
        p = Param(name, value)
        self.params[name] = p
        return p

    def add_buffer(self, name: str, value: np.ndarray) -> np.ndarray:
        self.buffers[name] = np.asarray(value, dtype=np.float64)
        return self.buffers[name]

    def __getitem__(self, name: str) -> Param:
        return self.params[name]

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def trainable_names(self) -> list[str]:
        return [n for n in sorted(self.params) if n not in self.frozen]

    def total_parameter_count(self) -> int:
        return sum(p.value.size for n, p in self.params.items() if n not in self.frozen)


def init_params(config: ModelConfig, rng: RngStream) -> ModelParams:
    """Fan-in-scaled uniform init for weights, zeros for biases, ones for
    batch-norm scales and edge-importance masks. Deterministic per seed:
    every tensor draws from its own named substream."""
    config.validate()
    params = ModelParams()
    v = config.vertex_count

    def uniform(name, shape, fan_in):
        limit = 1.0 / np.sqrt(fan_in)
        value = rng.child("init", name).uniform(-limit, limit, size=shape)
        return params.add(name, value)

    def bn(prefix, width):
        params.add(f"{prefix}.scale", np.ones(width))
        params.add(f"{prefix}.shift", np.zeros(width))
        params.add_buffer(f"{prefix}.mean", np.zeros(width))
        params.add_buffer(f"{prefix}.var", np.ones(width))

    bn("input_bn", config.in_channels * v)

    c_in = config.in_channels
    for j, blk in enumerate(config.blocks):
        c_out = blk.out_channels
        for p in range(3):
            uniform(f"blocks.{j}.gcn.weight.{p}", (c_in, c_out), c_in)
        params.add(f"blocks.{j}.gcn.bias", np.zeros(c_out))
        name = f"blocks.{j}.edge_importance"
        params.add(name, np.ones((3, v, v)))
        if not config.learn_edge_importance:
            params.frozen.add(name)
        uniform(
            f"blocks.{j}.tcn.kernel",
            (c_out, c_out, blk.temporal_kernel),
            c_out * blk.temporal_kernel,
        )
        bn(f"blocks.{j}.bn1", c_out)
        bn(f"blocks.{j}.bn2", c_out)
        if c_in != c_out:
            uniform(f"blocks.{j}.residual.weight", (c_in, c_out), c_in)
        c_in = c_out

    feat = config.feature_width
    h = config.bilstm_hidden
    for direction in ("fw", "bw"):
        uniform(f"bilstm.{direction}.wx", (feat, 4 * h), feat)
        uniform(f"bilstm.{direction}.wh", (h, 4 * h), h)
        params.add(f"bilstm.{direction}.b", np.zeros(4 * h))

    widths = (2 * h, *config.dense_widths, config.class_count)
    for i in range(3):
        uniform(f"head.{i}.weight", (widths[i], widths[i + 1]), widths[i])
        params.add(f"head.{i}.bias", np.zeros(widths[i + 1]))
    return params


def _batch_norm_p(x, params: ModelParams, prefix: str, config: ModelConfig, mode: str):
    scale = params[f"{prefix}.scale"]
    shift = params[f"{prefix}.shift"]
    y, vjp = ops.batch_norm(
        x,
        scale.value,
        shift.value,
        params.buffers[f"{prefix}.mean"],
        params.buffers[f"{prefix}.var"],
        mode,
        momentum=config.bn_momentum,
        eps=config.bn_eps,
    )

    def back(gy):
        gx, gscale, gshift = vjp(gy)
        scale.grad += gscale
        shift.grad += gshift
        return gx

    return y, back


def _input_norm(x, params: ModelParams, config: ModelConfig, mode: str):
    # Normalize each (channel, vertex) feature over (N, T): fold V into the
    # channel axis, reuse the 4-D batch norm, unfold.
    n, c, t, v = x.shape
    folded = np.ascontiguousarray(x.transpose(0, 1, 3, 2)).reshape(n, c * v, t, 1)
    y, back_bn = _batch_norm_p(folded, params, "input_bn", config, mode)
    out = y.reshape(n, c, v, t).transpose(0, 1, 3, 2)

    def back(gy):
        g = np.ascontiguousarray(gy.transpose(0, 1, 3, 2)).reshape(n, c * v, t, 1)
        gx = back_bn(g)
        return gx.reshape(n, c, v, t).transpose(0, 1, 3, 2)

    return out, back


def _graph_conv(x, params: ModelParams, prefix: str, adjacency: PartitionedAdjacency):
    """Partitioned graph convolution: y = sum_p (A_p * M_p) @ x @ W_p + b.

    A_p is the normalized partition stack, M_p its trainable elementwise
    mask. Internally runs channels-last so both contractions are GEMMs.
    """
    n, c, t, v = x.shape
    stacks = adjacency.stacks
    mask_p = params[f"{prefix}.edge_importance"]
    weights = [params[f"{prefix}.gcn.weight.{p}"] for p in range(3)]
    bias = params[f"{prefix}.gcn.bias"]
    c_out = weights[0].value.shape[1]

    x_l = np.ascontiguousarray(x.transpose(0, 2, 3, 1))  # (N, T, V, C)
    y_l = np.zeros((n, t, v, c_out))
    y_flat = y_l.reshape(-1, c_out)  # writable view
    aggregated = []
    for p in range(3):
        am = stacks[p] * mask_p.value[p]
        s = np.matmul(am, x_l)  # (N, T, V, C): s[..., i, :] = sum_j am[i, j] x[..., j, :]
        aggregated.append(s)
        y_flat += s.reshape(-1, c) @ weights[p].value
    y_flat += bias.value
    y = np.ascontiguousarray(y_l.transpose(0, 3, 1, 2))

    def back(gy):
        gy_l = np.ascontiguousarray(gy.transpose(0, 2, 3, 1))
        gy_flat = gy_l.reshape(-1, c_out)
        gx_l = np.zeros_like(x_l)
        for p in range(3):
            s = aggregated[p]
            weights[p].grad += s.reshape(-1, c).T @ gy_flat
            gs = (gy_flat @ weights[p].value.T).reshape(n, t, v, c)
            am = stacks[p] * mask_p.value[p]
            gx_l += np.matmul(am.T, gs)
            if mask_p.name not in params.frozen:
                mask_p.grad[p] += stacks[p] * np.tensordot(
                    gs, x_l, axes=([0, 1, 3], [0, 1, 3])
                )
        bias.grad += gy_flat.sum(axis=0)
        return np.ascontiguousarray(gx_l.transpose(0, 3, 1, 2))

    return y, back


def _temporal_conv(x, kernel: Param, dilation: int):
    n, c, t, v = x.shape
    c_out = kernel.value.shape[0]
    flat = np.ascontiguousarray(x.transpose(0, 3, 1, 2)).reshape(n * v, c, t)
    y_flat, vjp = ops.conv1d_dilated(flat, kernel.value, dilation)
    y = np.ascontiguousarray(
        y_flat.reshape(n, v, c_out, t).transpose(0, 2, 3, 1)
    )

    def back(gy):
        g_flat = np.ascontiguousarray(gy.transpose(0, 3, 1, 2)).reshape(n * v, c_out, t)
        gx_flat, gk = vjp(g_flat)
        kernel.grad += gk
        return np.ascontiguousarray(gx_flat.reshape(n, v, c, t).transpose(0, 2, 3, 1))

    return y, back


def _channel_projection(x, weight: Param):
    n, c, t, v = x.shape
    c_out = weight.value.shape[1]
    x_l = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    y = np.ascontiguousarray(
        (x_l.reshape(-1, c) @ weight.value).reshape(n, t, v, c_out).transpose(0, 3, 1, 2)
    )

    def back(gy):
        gy_l = np.ascontiguousarray(gy.transpose(0, 2, 3, 1)).reshape(-1, c_out)
        weight.grad += x_l.reshape(-1, c).T @ gy_l
        gx_l = (gy_l @ weight.value.T).reshape(n, t, v, c)
        return np.ascontiguousarray(gx_l.transpose(0, 3, 1, 2))

    return y, back


def stgcn_block_forward(
    x: np.ndarray,
    params: ModelParams,
    block_index: int,
    config: ModelConfig,
    adjacency: PartitionedAdjacency,
    mode: str,
    rng: RngStream | None = None,
):
    """One block: graph conv -> BN -> ReLU -> dropout -> temporal conv ->
    BN -> + residual -> ReLU. Returns (y, back)."""
    blk = config.blocks[block_index]
    if adjacency.node_count != x.shape[3]:
        raise ValueError(
            f"block {block_index}: adjacency has {adjacency.node_count} nodes,"
            f" input has {x.shape[3]}"
        )
    prefix = f"blocks.{block_index}"
    c_in = x.shape[1]

    h1, back_gcn = _graph_conv(x, params, prefix, adjacency)
    h2, back_bn1 = _batch_norm_p(h1, params, f"{prefix}.bn1", config, mode)
    h3, vjp_relu1 = ops.relu(h2)
    if mode == "train" and blk.dropout_rate > 0:
        if rng is None:
            raise ValueError("train mode requires an rng stream for dropout")
        drop_stream = rng.child("dropout", block_index)
    else:
        drop_stream = rng
    h4, vjp_drop = ops.dropout(h3, blk.dropout_rate, drop_stream, mode)
    h5, back_tcn = _temporal_conv(h4, params[f"{prefix}.tcn.kernel"], blk.dilation)
    h6, back_bn2 = _batch_norm_p(h5, params, f"{prefix}.bn2", config, mode)

    if c_in == blk.out_channels:
        res, back_res = x, None
    else:
        res, back_res = _channel_projection(x, params[f"{prefix}.residual.weight"])
    y, vjp_relu2 = ops.relu(h6 + res)

    def back(gy):
        g = vjp_relu2(gy)[0]
        g_main = back_bn2(g)
        g_main = back_tcn(g_main)
        g_main = vjp_drop(g_main)[0]
        g_main = vjp_relu1(g_main)[0]
        g_main = back_gcn(g_main)
        g_res = g if back_res is None else back_res(g)
        return g_main + g_res

    return y, back


def model_forward(
    x: np.ndarray,
    params: ModelParams,
    config: ModelConfig,
    adjacency: PartitionedAdjacency,
    rng: RngStream | None = None,
    mode: str = "infer",
):
    """Full network on a window batch (N, T, V, C) -> logits (N, T, classes).

    Returns (logits, back); ``back(g_logits)`` pushes gradients into the
    parameter registry and returns the gradient w.r.t. the input.
    """
    if x.ndim != 4:
        raise ValueError("model_forward: expected (N, T, V, C) input")
    n, t, v, c = x.shape
    if c != config.in_channels:
        raise ValueError(f"model_forward: expected C={config.in_channels}, got {c}")
    if v != config.vertex_count or v != adjacency.node_count:
        raise ValueError(
            f"model_forward: V mismatch (input {v}, config {config.vertex_count},"
            f" adjacency {adjacency.node_count})"
        )

    h = np.ascontiguousarray(x.transpose(0, 3, 1, 2), dtype=np.float64)  # (N, C, T, V)
    backs = []
    h, back_in = _input_norm(h, params, config, mode)
    backs.append(back_in)
    for j in range(len(config.blocks)):
        h, back_j = stgcn_block_forward(h, params, j, config, adjacency, mode, rng)
        backs.append(back_j)

    # (N, C, T, V) -> per-frame feature vectors (N, T, C*V)
    c_last = h.shape[1]
    feats = np.ascontiguousarray(h.transpose(0, 2, 1, 3)).reshape(n, t, c_last * v)

    lstm_names = [f"bilstm.{d}.{k}" for d in ("fw", "bw") for k in ("wx", "wh", "b")]
    lstm_params = [params[name] for name in lstm_names]
    seq, vjp_lstm = ops.bilstm_forward(feats, *[p.value for p in lstm_params])

    z1, vjp_d1 = ops.dense(seq, params["head.0.weight"].value, params["head.0.bias"].value)
    a1, vjp_r1 = ops.relu(z1)
    z2, vjp_d2 = ops.dense(a1, params["head.1.weight"].value, params["head.1.bias"].value)
    a2, vjp_r2 = ops.relu(z2)
    logits, vjp_d3 = ops.dense(
        a2, params["head.2.weight"].value, params["head.2.bias"].value
    )

    def back(g_logits):
        g, gw, gb = vjp_d3(g_logits)
        params["head.2.weight"].grad += gw
        params["head.2.bias"].grad += gb
        g = vjp_r2(g)[0]
        g, gw, gb = vjp_d2(g)
        params["head.1.weight"].grad += gw
        params["head.1.bias"].grad += gb
        g = vjp_r1(g)[0]
        g, gw, gb = vjp_d1(g)
        params["head.0.weight"].grad += gw
        params["head.0.bias"].grad += gb
        grads = vjp_lstm(g)
        g = grads[0]
        for p, gp in zip(lstm_params, grads[1:]):
            p.grad += gp
        g = np.ascontiguousarray(
            g.reshape(n, t, c_last, v).transpose(0, 2, 1, 3)
        )
        for back_fn in reversed(backs):
            g = back_fn(g)
        return g.transpose(0, 2, 3, 1)

    return logits, back


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def compute_loss(
    logits: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray,
    config: ModelConfig,
):
    """Cross-entropy plus weighted smoothing penalty.

    Returns (total, components, grad_logits); components carries the two
    raw terms for logging.
    """
    ce, _, vjp_ce = losses.softmax_cross_entropy(logits, labels, mask)
    log_probs, vjp_lsm = ops.log_softmax(logits)
    lam = config.smoothing_lambda
    if lam != 0.0 and logits.shape[1] >= 2:
        smooth, vjp_smooth = losses.truncated_mse_smoothing(
            log_probs, config.smoothing_tau, mask
        )
    else:
        smooth, vjp_smooth = 0.0, None
    total = ce + lam * smooth

    grad = vjp_ce(1.0)
    if vjp_smooth is not None:
        grad = grad + vjp_lsm(vjp_smooth(lam))[0]
    return total, {"ce": float(ce), "smoothing": float(smooth)}, grad


@dataclass
class LossRecord:
    total: float
    ce: float
    smoothing: float


def train_step(
    params: ModelParams,
    batch: tuple[np.ndarray, np.ndarray, np.ndarray],
    config: ModelConfig,
    adjacency: PartitionedAdjacency,
    rng: RngStream,
    lr: float = 5e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> LossRecord:
    """One optimization step on (windows, labels, mask). Gradients are
    accumulated, applied with Adam, then zeroed."""
    x, labels, mask = batch
    logits, back = model_forward(x, params, config, adjacency, rng, mode="train")
    total, components, grad_logits = compute_loss(logits, labels, mask, config)
    if not np.isfinite(total):
        name = _first_nonfinite(
            [("input", x), ("logits", logits)]
            + [(p.name, p.value) for p in params.params.values()]
        )
        raise FloatingPointError(f"non-finite loss; first non-finite tensor: {name}")
    back(grad_logits)
    for name in params.trainable_names():
        adam_step(params[name], lr, beta1, beta2, eps)
    params.zero_grads()
    return LossRecord(float(total), components["ce"], components["smoothing"])


def predict_frames(
    x: np.ndarray,
    params: ModelParams,
    config: ModelConfig,
    adjacency: PartitionedAdjacency,
    chunk_size: int = 16,
) -> np.ndarray:
    """Per-frame class probabilities for a window batch, in inference mode
    (running-statistics batch norm, no dropout)."""
    outs = []
    for start in range(0, x.shape[0], chunk_size):
        logits, _ = model_forward(
            x[start : start + chunk_size], params, config, adjacency, mode="infer"
        )
        outs.append(softmax(logits))
    return np.concatenate(outs, axis=0)


def _first_nonfinite(named) -> str:
    for name, arr in named:
        if not np.all(np.isfinite(arr)):
            return name
    return "<none found>"
