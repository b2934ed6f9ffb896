"""Compare the compiled convolution kernels against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times forward, input-gradient and weight-gradient kernels over a few
desk-scale shapes and prints one table row per (shape, op), plus an
end-to-end training comparison on the toy fixture.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from bnfi.engine import kernels
from bnfi.engine.data import SyntheticDatasetCfg
from bnfi.engine.train import TrainCfg, train_toy
from bnfi.models import toy_cnn

SHAPES = [
    # n, cin, cout, size, k, stride, padding, groups
    (32, 1, 10, 12, 3, 1, 1, 1),
    (32, 10, 16, 6, 3, 1, 1, 1),
    (16, 32, 32, 16, 3, 1, 1, 1),
    (16, 32, 32, 16, 3, 1, 1, 32),
]


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(repeats: int):
    print(f"{'shape':<34} {'op':<12} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    rng = np.random.default_rng(0)
    for n, cin, cout, size, k, stride, padding, groups in SHAPES:
        x = rng.normal(size=(n, cin, size, size))
        w = rng.normal(size=(cout, cin // groups, k, k))
        y = kernels.conv2d_forward(x, w, None, stride, padding, groups)
        dy = rng.normal(size=y.shape)
        label = f"n{n} {cin}->{cout} {size}x{size} k{k} g{groups}"
        ops = {
            "forward": lambda: kernels.conv2d_forward(x, w, None, stride, padding, groups),
            "grad_input": lambda: kernels.conv2d_grad_input(dy, w, x.shape, stride, padding, groups),
            "grad_weight": lambda: kernels.conv2d_grad_weights(dy, x, k, stride, padding, groups),
        }
        for op_name, op in ops.items():
            times = {}
            for backend in kernels.available_backends():
                kernels.set_backend(backend)
                times[backend] = _time(op, repeats)
            if "compiled" in times:
                ratio = times["numpy"] / times["compiled"]
                print(
                    f"{label:<34} {op_name:<12} {times['numpy'] * 1e3:9.2f}ms "
                    f"{times['compiled'] * 1e3:9.2f}ms {ratio:7.1f}x"
                )
            else:
                print(f"{label:<34} {op_name:<12} {times['numpy'] * 1e3:9.2f}ms {'n/a':>10}")


def bench_training():
    data_cfg = SyntheticDatasetCfg(seed=0)
    train_cfg = TrainCfg(epochs=5, seed=0)
    print()
    for backend in kernels.available_backends():
        kernels.set_backend(backend)
        t0 = time.perf_counter()
        train_toy(toy_cnn(seed=0), data_cfg, train_cfg)
        print(f"toy training, 5 epochs, backend={backend:<9} {time.perf_counter() - t0:6.2f}s")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    bench_kernels(args.repeats)
    bench_training()
