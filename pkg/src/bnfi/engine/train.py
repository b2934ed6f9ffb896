"""Minimal SGD trainer with exact batch-norm backprop.

Enough to produce trained desk-scale fixtures deterministically: softmax
cross-entropy, SGD with momentum and weight decay (applied to every
parameter, the common baseline recipe), BN running statistics tracked
with momentum 0.1 and biased batch variance.  Incomplete trailing batches
are dropped so batch statistics are always well defined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import ir
from . import kernels
from .data import Dataset, SyntheticDatasetCfg, make_dataset
from .forward import _bn_param_shape, run_forward


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainCfg:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (BN needs batch variance)")


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean loss and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    probs = expd / expd.sum(axis=1, keepdims=True)
    picked = shifted[np.arange(n), labels] - np.log(expd.sum(axis=1))
    loss = float(-picked.mean())
    grad = probs
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def _node_backward(node, cache, dout):
    """Returns (dx, grads) with grads a dict of parameter gradients."""
    if isinstance(node, ir.Conv2d):
        (x,) = cache
        dw = kernels.conv2d_grad_weights(
            dout, x, node.kernel, node.stride, node.padding, node.groups
        )
        dx = kernels.conv2d_grad_input(
            dout, node.weights, x.shape, node.stride, node.padding, node.groups
        )
        grads = {"weights": dw}
        if node.bias is not None:
            grads["bias"] = dout.sum(axis=(0, 2, 3))
        return dx, grads
    if isinstance(node, ir.BatchNorm):
        xhat, inv_std, axes, m, _, _ = cache
        dgamma = (dout * xhat).sum(axis=axes)
        dbeta = dout.sum(axis=axes)
        dxhat = dout * _bn_param_shape(dout, node.gamma)
        s1 = _bn_param_shape(dout, dxhat.sum(axis=axes))
        s2 = _bn_param_shape(dout, (dxhat * xhat).sum(axis=axes))
        dx = _bn_param_shape(dout, inv_std) / m * (m * dxhat - s1 - xhat * s2)
        return dx, {"gamma": dgamma, "beta": dbeta}
    if isinstance(node, ir.Activation):
        (x,) = cache
        return dout * node.fn.grad(x), None
    if isinstance(node, ir.Pool):
        x, y = cache
        k, s = node.kernel, node.stride
        oh, ow = y.shape[2], y.shape[3]
        dx = np.zeros_like(x)
        if node.kind == "avg":
            for kh in range(k):
                for kw in range(k):
                    dx[:, :, kh : kh + s * oh : s, kw : kw + s * ow : s] += dout / (k * k)
        else:
            claimed = np.zeros_like(y, dtype=bool)
            for kh in range(k):
                for kw in range(k):
                    window = x[:, :, kh : kh + s * oh : s, kw : kw + s * ow : s]
                    take = (window == y) & ~claimed
                    dx[:, :, kh : kh + s * oh : s, kw : kw + s * ow : s] += dout * take
                    claimed |= take
        return dx, None
    if isinstance(node, ir.GlobalAvgPool):
        (xshape,) = cache
        h, w = xshape[2], xshape[3]
        return np.broadcast_to(dout / (h * w), xshape).copy(), None
    if isinstance(node, ir.Flatten):
        (xshape,) = cache
        return dout.reshape(xshape), None
    if isinstance(node, ir.Linear):
        (x,) = cache
        return (
            dout @ node.weights,
            {"weights": dout.T @ x, "bias": dout.sum(axis=0)},
        )
    raise TypeError(type(node).__name__)


def backward(net: ir.NetworkIR, caches, dlogits):
    """Gradient of the loss for every parameter tensor, plus per-node BN
    batch statistics (from the caches) for the running-stat update."""
    grads: dict[tuple[int, str], np.ndarray] = {}
    dout = dlogits
    skip_stack = []
    for i in range(len(net.nodes) - 1, -1, -1):
        node = net.nodes[i]
        if isinstance(node, ir.ResidualBlockEnd):
            skip_stack.append(dout)
            continue
        if isinstance(node, ir.ResidualBlockBegin):
            dout = dout + skip_stack.pop()
            continue
        dout, node_grads = _node_backward(node, caches[i], dout)
        if node_grads:
            for name, g in node_grads.items():
                grads[(i, name)] = g
    return grads


def loss_and_grads(net: ir.NetworkIR, inputs, labels):
    """Train-mode loss and analytic gradients (used by the trainer and by
    finite-difference checks)."""
    logits, caches = run_forward(net, inputs, "train", want_caches=True)
    loss, dlogits = softmax_cross_entropy(logits, np.asarray(labels))
    return loss, backward(net, caches, dlogits)


def _parameters(net: ir.NetworkIR):
    for i, node in enumerate(net.nodes):
        if isinstance(node, ir.Conv2d):
            yield (i, "weights")
            if node.bias is not None:
                yield (i, "bias")
        elif isinstance(node, ir.BatchNorm):
            yield (i, "gamma")
            yield (i, "beta")
        elif isinstance(node, ir.Linear):
            yield (i, "weights")
            yield (i, "bias")


def train_toy(
    arch: ir.NetworkIR,
    data_cfg: SyntheticDatasetCfg,
    train_cfg: TrainCfg,
    dataset: Dataset | None = None,
) -> ir.NetworkIR:
    """SGD-train a copy of arch on the synthetic dataset; fully
    deterministic given the seeds.  Raises TrainingDivergedError on a
    non-finite loss."""
    ir.check(arch)
    for i, node in enumerate(arch.nodes):
        if isinstance(node, ir.Conv2d) and not (
            i + 1 < len(arch.nodes) and isinstance(arch.nodes[i + 1], ir.BatchNorm)
        ):
            raise ValueError(f"node {i}: trainer expects BN after every conv")
    net = ir.clone(arch)
    ds = dataset if dataset is not None else make_dataset(data_cfg, "train")
    rng = np.random.default_rng(train_cfg.seed)
    velocity = {key: 0.0 for key in _parameters(net)}
    bn_momentum = 0.1
    for _ in range(train_cfg.epochs):
        order = rng.permutation(len(ds))
        for start in range(0, len(ds) - train_cfg.batch_size + 1, train_cfg.batch_size):
            idx = order[start : start + train_cfg.batch_size]
            logits, caches = run_forward(net, ds.inputs[idx], "train", want_caches=True)
            loss, dlogits = softmax_cross_entropy(logits, ds.labels[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss became {loss}")
            grads = backward(net, caches, dlogits)
            for key in velocity:
                node = net.nodes[key[0]]
                p = getattr(node, key[1])
                g = grads[key] + train_cfg.weight_decay * p
                velocity[key] = train_cfg.momentum * velocity[key] + g
                setattr(node, key[1], p - train_cfg.learning_rate * velocity[key])
            for i, node in enumerate(net.nodes):
                if isinstance(node, ir.BatchNorm) and caches[i] is not None:
                    _, _, _, _, mean, var = caches[i]
                    node.running_mean = (1 - bn_momentum) * node.running_mean + bn_momentum * mean
                    node.running_var = (1 - bn_momentum) * node.running_var + bn_momentum * var
    return net
