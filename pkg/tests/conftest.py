import numpy as np
import pytest

from bnfi import ir
from bnfi.activations import make_activation
from bnfi.engine import SyntheticDatasetCfg, TrainCfg, make_dataset, train_toy
from bnfi.models import toy_cnn

TRAIN_SEEDS = (0, 1, 2, 3, 4)


@pytest.fixture(scope="session")
def trained_fixtures():
    """Five independently trained toy CNNs with their data configs.
    Shared by the engine, sweep and acceptance tests (training is the
    expensive part of the suite)."""
    out = []
    for seed in TRAIN_SEEDS:
        data_cfg = SyntheticDatasetCfg(seed=seed)
        net = train_toy(toy_cnn(seed=seed), data_cfg, TrainCfg(epochs=30, seed=seed))
        out.append((net, data_cfg))
    return out


@pytest.fixture(scope="session")
def trained_net(trained_fixtures):
    return trained_fixtures[0][0]


@pytest.fixture(scope="session")
def trained_data(trained_fixtures):
    return make_dataset(trained_fixtures[0][1], "train")


def fresh_bn(ch, gamma=None, beta=None, eps=1e-5):
    return ir.BatchNorm(
        gamma=np.ones(ch) if gamma is None else np.asarray(gamma, dtype=float),
        beta=np.zeros(ch) if beta is None else np.asarray(beta, dtype=float),
        running_mean=np.zeros(ch),
        running_var=np.ones(ch),
        eps=eps,
    )


def chain_net(c1=4, c2=6, classes=3, size=8, activation="relu", seed=0):
    """conv -> bn -> act -> conv -> bn -> act -> gap -> flatten -> linear."""
    rng = np.random.default_rng(seed)
    f32 = lambda a: a.astype(np.float32).astype(np.float64)
    act = make_activation(activation)
    nodes = [
        ir.Conv2d(f32(rng.normal(0, 0.5, (c1, 1, 3, 3))), None, 1, 1, 1),
        fresh_bn(c1, gamma=f32(rng.normal(1, 0.3, c1)), beta=f32(rng.normal(0, 0.3, c1))),
        ir.Activation(act),
        ir.Conv2d(f32(rng.normal(0, 0.5, (c2, c1, 3, 3))), None, 1, 1, 1),
        fresh_bn(c2, gamma=f32(rng.normal(1, 0.3, c2)), beta=f32(rng.normal(0, 0.3, c2))),
        ir.Activation(act),
        ir.GlobalAvgPool(),
        ir.Flatten(),
        ir.Linear(f32(rng.normal(0, 0.5, (classes, c2))), f32(rng.normal(0, 0.1, classes))),
    ]
    return ir.NetworkIR(nodes=nodes, input_shape=(1, size, size), name="chain")


def random_valid_net(rng):
    """A randomized small network for serialization round-trip tests;
    weights drawn on the f32 grid so the file format is lossless."""
    f32 = lambda a: a.astype(np.float32).astype(np.float64)
    cin = int(rng.integers(1, 4))
    size = int(rng.integers(6, 13))
    nodes = []
    c = cin
    blocks = int(rng.integers(1, 4))
    for _ in range(blocks):
        cout = int(rng.integers(2, 9))
        kind = rng.random()
        if kind < 0.25 and c > 1:
            # depthwise block
            nodes.append(ir.Conv2d(f32(rng.normal(0, 0.5, (c, 1, 3, 3))), None, 1, 1, c))
            cout = c
        else:
            bias = f32(rng.normal(0, 0.1, cout)) if rng.random() < 0.5 else None
            nodes.append(ir.Conv2d(f32(rng.normal(0, 0.5, (cout, c, 3, 3))), bias, 1, 1, 1))
        nodes.append(
            ir.BatchNorm(
                gamma=f32(rng.normal(1, 0.3, cout)),
                beta=f32(rng.normal(0, 0.3, cout)),
                running_mean=f32(rng.normal(0, 0.3, cout)),
                running_var=f32(rng.uniform(0.5, 2.0, cout)),
                eps=1e-5,
            )
        )
        act = ("identity", "relu", "leaky_relu", "swish")[int(rng.integers(0, 4))]
        nodes.append(ir.Activation(make_activation(act, alpha=0.1)))
        c = cout
    classes = int(rng.integers(2, 6))
    nodes += [
        ir.GlobalAvgPool(),
        ir.Flatten(),
        ir.Linear(f32(rng.normal(0, 0.5, (classes, c))), f32(rng.normal(0, 0.1, classes))),
    ]
    return ir.NetworkIR(
        nodes=nodes, input_shape=(cin, size, size), name=f"rand{int(rng.integers(1e6))}"
    )
