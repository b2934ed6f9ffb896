# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels (hot inner loops of the engine).

The forward accumulates per output element in the same sequence as
numpy_kernels (bias first, then one term per (input channel, kernel row,
kernel col) ascending), so both backends produce bit-identical forwards.
The gradient kernels order their sums for speed instead and agree with
the fallback to rounding error.
"""

import numpy as np

cimport numpy as cnp

NAME = "compiled"


def conv2d_forward(cnp.float64_t[:, :, :, ::1] x,
                   cnp.float64_t[:, :, :, ::1] w,
                   bias,
                   int stride, int padding, int groups):
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], cin_g = w.shape[1], k = w.shape[2]
    cdef Py_ssize_t oh = (h + 2 * padding - k) // stride + 1
    cdef Py_ssize_t ow = (wd + 2 * padding - k) // stride + 1
    cdef Py_ssize_t cout_g = cout // groups
    out_arr = np.empty((n, cout, oh, ow))
    cdef cnp.float64_t[:, :, :, ::1] out = out_arr
    cdef cnp.float64_t[::1] b
    cdef bint has_bias = bias is not None
    if has_bias:
        b = np.ascontiguousarray(bias)
    cdef Py_ssize_t i, co, oy, ox, g, ci_local, ci, kh, kw, iy, ix
    cdef double acc
    for i in range(n):
        for co in range(cout):
            g = co // cout_g
            for oy in range(oh):
                for ox in range(ow):
                    acc = b[co] if has_bias else 0.0
                    for ci_local in range(cin_g):
                        ci = g * cin_g + ci_local
                        for kh in range(k):
                            iy = oy * stride - padding + kh
                            if iy < 0 or iy >= h:
                                continue
                            for kw in range(k):
                                ix = ox * stride - padding + kw
                                if ix < 0 or ix >= wd:
                                    continue
                                acc += w[co, ci_local, kh, kw] * x[i, ci, iy, ix]
                    out[i, co, oy, ox] = acc
    return out_arr


def conv2d_grad_input(cnp.float64_t[:, :, :, ::1] dy,
                      cnp.float64_t[:, :, :, ::1] w,
                      x_shape,
                      int stride, int padding, int groups):
    # scatter form: for each dy element, spray w * dy into dx; the
    # bounds of the valid output window are hoisted out of the hot loop
    cdef Py_ssize_t n = x_shape[0], cin = x_shape[1], h = x_shape[2], wd = x_shape[3]
    cdef Py_ssize_t cout = w.shape[0], cin_g = w.shape[1], k = w.shape[2]
    cdef Py_ssize_t oh = dy.shape[2], ow = dy.shape[3]
    cdef Py_ssize_t cout_g = cout // groups
    dx_arr = np.zeros((n, cin, h, wd))
    cdef cnp.float64_t[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t i, co, g, cl, ci, kh, kw, oy, ox, iy, ix, iy0, ix0
    cdef double v, wv
    for i in range(n):
        for co in range(cout):
            g = co // cout_g
            for oy in range(oh):
                iy0 = oy * stride - padding
                for ox in range(ow):
                    ix0 = ox * stride - padding
                    v = dy[i, co, oy, ox]
                    if v == 0.0:
                        continue
                    for cl in range(cin_g):
                        ci = g * cin_g + cl
                        for kh in range(k):
                            iy = iy0 + kh
                            if iy < 0 or iy >= h:
                                continue
                            for kw in range(k):
                                ix = ix0 + kw
                                if ix < 0 or ix >= wd:
                                    continue
                                dx[i, ci, iy, ix] += w[co, cl, kh, kw] * v
    return dx_arr


def conv2d_grad_weights(cnp.float64_t[:, :, :, ::1] dy,
                        cnp.float64_t[:, :, :, ::1] x,
                        int k, int stride, int padding, int groups):
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t cout = dy.shape[1], oh = dy.shape[2], ow = dy.shape[3]
    cdef Py_ssize_t cin_g = cin // groups
    cdef Py_ssize_t cout_g = cout // groups
    dw_arr = np.empty((cout, cin_g, k, k))
    cdef cnp.float64_t[:, :, :, ::1] dw = dw_arr
    cdef Py_ssize_t co, g, ci_local, ci, kh, kw, i, oy, ox, iy, ix
    cdef Py_ssize_t oy_lo, oy_hi, ox_lo, ox_hi
    cdef double acc
    for co in range(cout):
        g = co // cout_g
        for ci_local in range(cin_g):
            ci = g * cin_g + ci_local
            for kh in range(k):
                # valid output rows for this kernel row
                oy_lo = 0
                if padding - kh > 0:
                    oy_lo = (padding - kh + stride - 1) // stride
                oy_hi = oh
                if (h - 1 + padding - kh) // stride + 1 < oh:
                    oy_hi = (h - 1 + padding - kh) // stride + 1
                for kw in range(k):
                    ox_lo = 0
                    if padding - kw > 0:
                        ox_lo = (padding - kw + stride - 1) // stride
                    ox_hi = ow
                    if (wd - 1 + padding - kw) // stride + 1 < ow:
                        ox_hi = (wd - 1 + padding - kw) // stride + 1
                    acc = 0.0
                    for i in range(n):
                        for oy in range(oy_lo, oy_hi):
                            iy = oy * stride - padding + kh
                            for ox in range(ox_lo, ox_hi):
                                ix = ox * stride - padding + kw
                                acc += dy[i, co, oy, ox] * x[i, ci, iy, ix]
                    dw[co, ci_local, kh, kw] = acc
    return dw_arr
