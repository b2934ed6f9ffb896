"""Ready-made desk-scale architectures."""

from __future__ import annotations

import numpy as np

from . import ir
from .activations import make_activation


def _f32(a: np.ndarray) -> np.ndarray:
    # keep fresh weights exactly representable in the file format
    return a.astype(np.float32).astype(np.float64)


def _fresh_bn(ch: int) -> ir.BatchNorm:
    return ir.BatchNorm(
        gamma=np.ones(ch),
        beta=np.zeros(ch),
        running_mean=np.zeros(ch),
        running_var=np.ones(ch),
        eps=1e-5,
    )


def toy_cnn(
    in_channels: int = 1,
    num_classes: int = 4,
    image_size: int = 12,
    widths: tuple[int, int] = (10, 16),
    activation: str = "relu",
    alpha: float = 0.01,
    seed: int = 0,
) -> ir.NetworkIR:
    """Two conv blocks with BN, a pooling stage and a linear head.  Both
    convs are prunable units; He-initialized from the seed."""
    rng = np.random.default_rng([seed, 7])
    c1, c2 = widths
    act = make_activation(activation, alpha)
    k = 3

    def conv(cin, cout):
        # bias-free: the following BN absorbs any per-channel shift
        std = np.sqrt(2.0 / (cin * k * k))
        return ir.Conv2d(
            weights=_f32(rng.normal(0.0, std, size=(cout, cin, k, k))),
            bias=None,
            stride=1,
            padding=1,
        )

    head_std = np.sqrt(1.0 / c2)
    nodes: list[ir.Node] = [
        conv(in_channels, c1),
        _fresh_bn(c1),
        ir.Activation(act),
        ir.Pool("avg", 2, 2),
        conv(c1, c2),
        _fresh_bn(c2),
        ir.Activation(act),
        ir.GlobalAvgPool(),
        ir.Flatten(),
        ir.Linear(
            weights=_f32(rng.normal(0.0, head_std, size=(num_classes, c2))),
            bias=np.zeros(num_classes),
        ),
    ]
    return ir.NetworkIR(
        nodes=nodes,
        input_shape=(in_channels, image_size, image_size),
        name="toy-cnn",
    )
