"""Convolution kernel dispatch: compiled core with a NumPy fallback.

The compiled extension is picked automatically at import when available;
BNFI_PURE_PY=1 forces the fallback.  Both backends produce bit-identical
forward results (see benchmarks/bench_kernels.py for the speed gap).
"""

from __future__ import annotations

import os

import numpy as np

from . import numpy_kernels

try:
    from . import _convkernels as _compiled
except ImportError:  # extension not built; run on the fallback
    _compiled = None

_BACKENDS = {"numpy": numpy_kernels}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

if os.environ.get("BNFI_PURE_PY", "0") not in ("", "0"):
    _active = numpy_kernels
else:
    _active = _compiled if _compiled is not None else numpy_kernels


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend() -> str:
    return _active.NAME


def set_backend(name: str) -> None:
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"backend {name!r} not available (have {available_backends()})"
        ) from None


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def conv2d_forward(x, w, bias, stride=1, padding=0, groups=1):
    bias = None if bias is None else _c(bias)
    return _active.conv2d_forward(_c(x), _c(w), bias, stride, padding, groups)


def conv2d_grad_input(dy, w, x_shape, stride=1, padding=0, groups=1):
    return _active.conv2d_grad_input(_c(dy), _c(w), tuple(x_shape), stride, padding, groups)


def conv2d_grad_weights(dy, x, k, stride=1, padding=0, groups=1):
    return _active.conv2d_grad_weights(_c(dy), _c(x), k, stride, padding, groups)
