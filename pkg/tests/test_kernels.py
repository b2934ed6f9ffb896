"""Convolution kernels against a brute-force oracle, and both backends
against each other (forwards must agree bit for bit)."""

import numpy as np
import pytest

from bnfi.engine import kernels


def brute_force_conv(x, w, bias, stride, padding, groups):
    n, cin, h, wd = x.shape
    cout, cin_g, k, _ = w.shape
    oh = (h + 2 * padding - k) // stride + 1
    ow = (wd + 2 * padding - k) // stride + 1
    cout_g = cout // groups
    out = np.zeros((n, cout, oh, ow))
    for i in range(n):
        for co in range(cout):
            g = co // cout_g
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0 if bias is None else bias[co]
                    for cl in range(cin_g):
                        ci = g * cin_g + cl
                        for kh in range(k):
                            for kw in range(k):
                                iy = oy * stride - padding + kh
                                ix = ox * stride - padding + kw
                                if 0 <= iy < h and 0 <= ix < wd:
                                    acc += w[co, cl, kh, kw] * x[i, ci, iy, ix]
                    out[i, co, oy, ox] = acc
    return out


CASES = [
    dict(n=2, cin=3, cout=4, size=7, k=3, stride=1, padding=1, groups=1, bias=True),
    dict(n=1, cin=2, cout=4, size=6, k=3, stride=2, padding=0, groups=1, bias=False),
    dict(n=2, cin=4, cout=4, size=5, k=3, stride=1, padding=1, groups=4, bias=True),
    dict(n=1, cin=4, cout=6, size=6, k=1, stride=1, padding=0, groups=2, bias=False),
    dict(n=3, cin=1, cout=2, size=8, k=5, stride=2, padding=2, groups=1, bias=True),
]


def _make(case, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(case["n"], case["cin"], case["size"], case["size"]))
    w = rng.normal(size=(case["cout"], case["cin"] // case["groups"], case["k"], case["k"]))
    b = rng.normal(size=case["cout"]) if case["bias"] else None
    return x, w, b


@pytest.mark.parametrize("case", CASES)
@pytest.mark.parametrize("backend", kernels.available_backends())
def test_forward_matches_brute_force(case, backend):
    x, w, b = _make(case)
    kernels.set_backend(backend)
    try:
        got = kernels.conv2d_forward(x, w, b, case["stride"], case["padding"], case["groups"])
    finally:
        kernels.set_backend(kernels.available_backends()[-1])
    want = brute_force_conv(x, w, b, case["stride"], case["padding"], case["groups"])
    assert np.allclose(got, want, rtol=0, atol=1e-12)


@pytest.mark.skipif(
    "compiled" not in kernels.available_backends(), reason="extension not built"
)
@pytest.mark.parametrize("case", CASES)
def test_backends_forward_bit_identical(case):
    x, w, b = _make(case, seed=1)
    args = (case["stride"], case["padding"], case["groups"])
    kernels.set_backend("compiled")
    yc = kernels.conv2d_forward(x, w, b, *args)
    kernels.set_backend("numpy")
    yn = kernels.conv2d_forward(x, w, b, *args)
    kernels.set_backend("compiled")
    assert np.array_equal(yc, yn)


@pytest.mark.skipif(
    "compiled" not in kernels.available_backends(), reason="extension not built"
)
@pytest.mark.parametrize("case", CASES)
def test_backends_gradients_agree(case):
    x, w, b = _make(case, seed=2)
    args = (case["stride"], case["padding"], case["groups"])
    y = kernels.conv2d_forward(x, w, b, *args)
    dy = np.random.default_rng(3).normal(size=y.shape)
    out = {}
    for backend in ("compiled", "numpy"):
        kernels.set_backend(backend)
        out[backend] = (
            kernels.conv2d_grad_input(dy, w, x.shape, *args),
            kernels.conv2d_grad_weights(dy, x, case["k"], *args),
        )
    kernels.set_backend("compiled")
    assert np.allclose(out["compiled"][0], out["numpy"][0], rtol=1e-12, atol=1e-12)
    assert np.allclose(out["compiled"][1], out["numpy"][1], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("case", CASES)
def test_gradients_match_finite_differences(case):
    x, w, b = _make(case, seed=4)
    args = (case["stride"], case["padding"], case["groups"])
    rng = np.random.default_rng(5)
    y = kernels.conv2d_forward(x, w, b, *args)
    dy = rng.normal(size=y.shape)

    def loss(xx, ww):
        return float(np.sum(kernels.conv2d_forward(xx, ww, b, *args) * dy))

    dx = kernels.conv2d_grad_input(dy, w, x.shape, *args)
    dw = kernels.conv2d_grad_weights(dy, x, case["k"], *args)
    h = 1e-6
    for _ in range(20):
        idx = tuple(rng.integers(0, d) for d in x.shape)
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        num = (loss(xp, w) - loss(xm, w)) / (2 * h)
        assert num == pytest.approx(dx[idx], rel=1e-5, abs=1e-7)
    for _ in range(20):
        idx = tuple(rng.integers(0, d) for d in w.shape)
        wp, wm = w.copy(), w.copy()
        wp[idx] += h
        wm[idx] -= h
        num = (loss(x, wp) - loss(x, wm)) / (2 * h)
        assert num == pytest.approx(dw[idx], rel=1e-5, abs=1e-7)


def test_backend_selection_api():
    names = kernels.available_backends()
    assert "numpy" in names
    with pytest.raises(ValueError):
        kernels.set_backend("cuda")
    current = kernels.get_backend()
    assert current in names
