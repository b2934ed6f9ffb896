"""Pure-NumPy convolution kernels (fallback backend).

The forward accumulation order is pinned: each output element is built by
adding one term per (input channel, kernel row, kernel col) in ascending
order, with the bias as the starting value.  The compiled backend replays
the exact same sequence, so forward results agree bit for bit across
backends and pruning an exactly-zero channel cannot perturb the surviving
sums.  Gradients agree across backends to rounding error only.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def conv2d_forward(x, w, bias, stride: int, padding: int, groups: int):
    n, cin, h, wd = x.shape
    cout, cin_g, k, _ = w.shape
    oh = (h + 2 * padding - k) // stride + 1
    ow = (wd + 2 * padding - k) // stride + 1
    cout_g = cout // groups
    xp = _pad(x, padding)
    if bias is None:
        out = np.zeros((n, cout, oh, ow))
    else:
        out = np.broadcast_to(bias[None, :, None, None], (n, cout, oh, ow)).copy()
    for g in range(groups):
        co = slice(g * cout_g, (g + 1) * cout_g)
        for ci_local in range(cin_g):
            ci = g * cin_g + ci_local
            for kh in range(k):
                for kw in range(k):
                    xs = xp[:, ci, kh : kh + stride * oh : stride, kw : kw + stride * ow : stride]
                    out[:, co] += w[co, ci_local, kh, kw][None, :, None, None] * xs[:, None]
    return out


def conv2d_grad_input(dy, w, x_shape, stride: int, padding: int, groups: int):
    n, cin, h, wd = x_shape
    cout, cin_g, k, _ = w.shape
    _, _, oh, ow = dy.shape
    cout_g = cout // groups
    dxp = np.zeros((n, cin, h + 2 * padding, wd + 2 * padding))
    for g in range(groups):
        ci = slice(g * cin_g, (g + 1) * cin_g)
        for co_local in range(cout_g):
            co = g * cout_g + co_local
            for kh in range(k):
                for kw in range(k):
                    dxp[:, ci, kh : kh + stride * oh : stride, kw : kw + stride * ow : stride] += (
                        w[co, :, kh, kw][None, :, None, None] * dy[:, co][:, None]
                    )
    if padding == 0:
        return dxp
    return dxp[:, :, padding : padding + h, padding : padding + wd].copy()


def conv2d_grad_weights(dy, x, k: int, stride: int, padding: int, groups: int):
    cin = x.shape[1]
    cout, oh, ow = dy.shape[1], dy.shape[2], dy.shape[3]
    cin_g = cin // groups
    cout_g = cout // groups
    xp = _pad(x, padding)
    dw = np.empty((cout, cin_g, k, k))
    for kh in range(k):
        for kw in range(k):
            xs = xp[:, :, kh : kh + stride * oh : stride, kw : kw + stride * ow : stride]
            for g in range(groups):
                co = slice(g * cout_g, (g + 1) * cout_g)
                ci = slice(g * cin_g, (g + 1) * cin_g)
                dw[co, :, kh, kw] = np.tensordot(
                    dy[:, co], xs[:, ci], axes=([0, 2, 3], [0, 2, 3])
                )
    return dw
