"""Deterministic dense forward pass and evaluation helpers.

Everything runs in float64 with a fixed summation order (channels
ascending, spatial row-major), so repeated calls agree bit for bit and
removing an exactly-zero channel cannot change surviving outputs.  The
forward never mutates the network; BN running statistics are updated only
by the trainer.
"""

from __future__ import annotations

import math

import numpy as np

from .. import ir
from . import kernels
from .data import Dataset


def _bn_axes(x: np.ndarray):
    return (0, 2, 3) if x.ndim == 4 else (0,)


def _bn_param_shape(x: np.ndarray, v: np.ndarray):
    return v[None, :, None, None] if x.ndim == 4 else v[None, :]


def _avg_pool(x, k, s):
    n, c, h, w = x.shape
    oh = (h - k) // s + 1
    ow = (w - k) // s + 1
    out = np.zeros((n, c, oh, ow))
    for kh in range(k):
        for kw in range(k):
            out += x[:, :, kh : kh + s * oh : s, kw : kw + s * ow : s]
    return out / (k * k)


def _max_pool(x, k, s):
    n, c, h, w = x.shape
    oh = (h - k) // s + 1
    ow = (w - k) // s + 1
    out = np.full((n, c, oh, ow), -np.inf)
    for kh in range(k):
        for kw in range(k):
            np.maximum(out, x[:, :, kh : kh + s * oh : s, kw : kw + s * ow : s], out=out)
    return out


def _node_forward(node, x, mode, want_cache):
    """Returns (output, cache); cache is None unless want_cache."""
    cache = None
    if isinstance(node, ir.Conv2d):
        y = kernels.conv2d_forward(
            x, node.weights, node.bias, node.stride, node.padding, node.groups
        )
        if want_cache:
            cache = (x,)
    elif isinstance(node, ir.BatchNorm):
        axes = _bn_axes(x)
        if mode == "train":
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)  # biased, as used in the normalization
        else:
            mean, var = node.running_mean, node.running_var
        inv_std = 1.0 / np.sqrt(var + node.eps)
        xhat = (x - _bn_param_shape(x, mean)) * _bn_param_shape(x, inv_std)
        y = _bn_param_shape(x, node.gamma) * xhat + _bn_param_shape(x, node.beta)
        if want_cache:
            m = int(np.prod([x.shape[a] for a in axes]))
            cache = (xhat, inv_std, axes, m, mean, var)
    elif isinstance(node, ir.Activation):
        y = node.fn(x)
        if want_cache:
            cache = (x,)
    elif isinstance(node, ir.Pool):
        y = _avg_pool(x, node.kernel, node.stride) if node.kind == "avg" else _max_pool(
            x, node.kernel, node.stride
        )
        if want_cache:
            cache = (x, y)
    elif isinstance(node, ir.GlobalAvgPool):
        y = x.mean(axis=(2, 3), keepdims=True)
        if want_cache:
            cache = (x.shape,)
    elif isinstance(node, ir.Flatten):
        y = x.reshape(x.shape[0], -1)
        if want_cache:
            cache = (x.shape,)
    elif isinstance(node, ir.Linear):
        y = x @ node.weights.T + node.bias
        if want_cache:
            cache = (x,)
    else:  # residual markers handled by the driver
        raise TypeError(type(node).__name__)
    return y, cache


def run_forward(net, inputs, mode="eval", want_caches=False, capture_normalized=None):
    """Drive the node list; optionally keep per-node caches for backprop
    and collect the pre-affine normalized values of selected BN nodes
    (capture_normalized: dict node_index -> list)."""
    x = np.asarray(inputs, dtype=np.float64)
    expect = (x.shape[0],) + tuple(net.input_shape)
    if x.shape != expect:
        raise ValueError(f"input shape {x.shape} does not match {expect}")
    caches = [None] * len(net.nodes) if want_caches else None
    stack = []
    for i, node in enumerate(net.nodes):
        if isinstance(node, ir.ResidualBlockBegin):
            stack.append(x)
            continue
        if isinstance(node, ir.ResidualBlockEnd):
            x = x + stack.pop()
            continue
        x, cache = _node_forward(node, x, mode, want_caches)
        if want_caches:
            caches[i] = cache
        if capture_normalized is not None and i in capture_normalized:
            if not isinstance(node, ir.BatchNorm):
                raise ValueError(f"node {i} is not a batch norm")
            # recompute cheaply in capture-only runs
            if cache is not None:
                capture_normalized[i].append(cache[0])
            else:
                raise ValueError("capture requires want_caches")
    return (x, caches) if want_caches else x


def forward(net: ir.NetworkIR, inputs, mode: str = "eval") -> np.ndarray:
    """Logits of shape (N, num_classes)."""
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    ir.check(net)
    return run_forward(net, inputs, mode)


def accuracy(net: ir.NetworkIR, dataset: Dataset, batch_size: int = 512) -> float:
    """Fraction of argmax-correct eval-mode predictions (ties resolve to
    the lowest class index)."""
    ir.check(net)
    correct = 0
    for start in range(0, len(dataset), batch_size):
        xb = dataset.inputs[start : start + batch_size]
        yb = dataset.labels[start : start + batch_size]
        logits = run_forward(net, xb, "eval")
        correct += int(np.sum(np.argmax(logits, axis=1) == yb))
    return correct / len(dataset)


def normalized_histogram(values: np.ndarray, bins: int = 64, lo: float = -5.0, hi: float = 5.0):
    """Density histogram normalized over the in-range mass (integrates to
    one whenever any value lands in range)."""
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    width = (hi - lo) / bins
    total = counts.sum()
    density = counts / (max(total, 1) * width)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return density, centers


def gaussianity_report(
    net: ir.NetworkIR,
    dataset: Dataset,
    layer: int,
    batch_sizes: list[int],
    bins: int = 64,
) -> list[tuple[int, float]]:
    """Mean squared error between the per-channel histogram of normalized
    BN inputs and the standard normal density, for each batch size.

    One batch of the first b samples per batch size; the per-channel MSEs
    are averaged.  Larger batches should trend toward lower MSE.
    """
    ir.check(net)
    if not (0 <= layer < len(net.nodes)) or not isinstance(net.nodes[layer], ir.BatchNorm):
        raise ValueError(f"layer {layer} is not a batch norm node")
    out = []
    for b in batch_sizes:
        take = min(int(b), len(dataset))
        grabbed = {layer: []}
        run_forward(
            net, dataset.inputs[:take], "train", want_caches=True,
            capture_normalized=grabbed,
        )
        xhat = grabbed[layer][0]
        channels = xhat.shape[1]
        mses = []
        for c in range(channels):
            density, centers = normalized_histogram(xhat[:, c].ravel(), bins=bins)
            ref = np.exp(-0.5 * centers**2) / math.sqrt(2.0 * math.pi)
            mses.append(float(np.mean((density - ref) ** 2)))
        out.append((int(b), float(np.mean(mses))))
    return out
