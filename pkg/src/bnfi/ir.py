"""Serializable intermediate representation of small CNN/MLP graphs.

A network is an ordered node list over a single value; residual skip-adds
are expressed with begin/end markers delimiting the skipped span.  The IR
is the unit of scoring, pruning, inference and file I/O.  Instances are
treated as immutable: every transformation returns a new value.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .activations import ActivationFn


class InvalidNetworkError(ValueError):
    """Raised where an operation requires a structurally valid network."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class Conv2d:
    weights: np.ndarray  # (out_ch, in_ch // groups, k, k)
    bias: np.ndarray | None = None
    stride: int = 1
    padding: int = 0
    groups: int = 1

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float64)

    @property
    def out_ch(self) -> int:
        return self.weights.shape[0]

    @property
    def in_ch(self) -> int:
        return self.weights.shape[1] * self.groups

    @property
    def kernel(self) -> int:
        return self.weights.shape[2]

    @property
    def is_depthwise(self) -> bool:
        return self.groups > 1 and self.groups == self.in_ch == self.out_ch


@dataclass
class BatchNorm:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5

    def __post_init__(self):
        for name in ("gamma", "beta", "running_mean", "running_var"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]


@dataclass
class Activation:
    fn: ActivationFn


@dataclass
class Pool:
    kind: str  # "avg" | "max"
    kernel: int
    stride: int


@dataclass
class GlobalAvgPool:
    pass


@dataclass
class Flatten:
    pass


@dataclass
class Linear:
    weights: np.ndarray  # (out_features, in_features)
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)

    @property
    def out_features(self) -> int:
        return self.weights.shape[0]

    @property
    def in_features(self) -> int:
        return self.weights.shape[1]


@dataclass
class ResidualBlockBegin:
    pass


@dataclass
class ResidualBlockEnd:
    pass


Node = Union[
    Conv2d,
    BatchNorm,
    Activation,
    Pool,
    GlobalAvgPool,
    Flatten,
    Linear,
    ResidualBlockBegin,
    ResidualBlockEnd,
]


@dataclass
class NetworkIR:
    nodes: list[Node]
    input_shape: tuple[int, ...]  # (C, H, W) or (F,)
    name: str = ""
    version: int = 1

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)


@dataclass(frozen=True)
class PrunableUnit:
    """A conv -> BN -> activation triple whose output channels can be
    removed, together with every node whose channel dimension must shrink
    in lockstep."""

    conv_index: int
    bn_index: int
    act_index: int
    consumers: tuple[int, ...]


def _finite(a: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(a)))


def _node_shape(node: Node, shape, report):
    """Shape after applying node to shape, or None if inapplicable."""
    if isinstance(node, Conv2d):
        if len(shape) != 3:
            report("conv2d requires a (C, H, W) input")
            return None
        c, h, w = shape
        if node.in_ch != c:
            report(f"conv2d expects {node.in_ch} input channels, got {c}")
            return None
        k, s, p = node.kernel, node.stride, node.padding
        oh = (h + 2 * p - k) // s + 1
        ow = (w + 2 * p - k) // s + 1
        if oh < 1 or ow < 1:
            report(f"conv2d kernel {k} does not fit input {h}x{w}")
            return None
        return (node.out_ch, oh, ow)
    if isinstance(node, BatchNorm):
        if node.channels != shape[0]:
            report(f"batch norm has {node.channels} channels, input has {shape[0]}")
            return None
        return shape
    if isinstance(node, Pool):
        if len(shape) != 3:
            report("pool requires a (C, H, W) input")
            return None
        c, h, w = shape
        oh = (h - node.kernel) // node.stride + 1
        ow = (w - node.kernel) // node.stride + 1
        if oh < 1 or ow < 1:
            report(f"pool kernel {node.kernel} does not fit input {h}x{w}")
            return None
        return (c, oh, ow)
    if isinstance(node, GlobalAvgPool):
        if len(shape) != 3:
            report("global average pool requires a (C, H, W) input")
            return None
        return (shape[0], 1, 1)
    if isinstance(node, Flatten):
        if len(shape) != 3:
            report("flatten requires a (C, H, W) input")
            return None
        return (shape[0] * shape[1] * shape[2],)
    if isinstance(node, Linear):
        if len(shape) != 1:
            report("linear requires a flat input")
            return None
        if node.in_features != shape[0]:
            report(f"linear expects {node.in_features} features, got {shape[0]}")
            return None
        return (node.out_features,)
    return shape  # Activation / residual markers preserve the shape


def validate(net: NetworkIR) -> list[str]:
    """All structural violations of the network; empty list means valid."""
    v: list[str] = []
    nodes = net.nodes

    if len(net.input_shape) not in (1, 3) or any(d < 1 for d in net.input_shape):
        v.append(f"bad input shape {net.input_shape}")

    # node-local invariants
    for i, nd in enumerate(nodes):
        tag = f"node {i}"
        if isinstance(nd, Conv2d):
            if nd.weights.ndim != 4 or nd.weights.shape[2] != nd.weights.shape[3]:
                v.append(f"{tag}: conv weights must be (out, in/groups, k, k)")
                continue
            if not _finite(nd.weights) or (nd.bias is not None and not _finite(nd.bias)):
                v.append(f"{tag}: conv has non-finite parameters")
            if nd.stride < 1 or nd.padding < 0 or nd.groups < 1:
                v.append(f"{tag}: bad conv stride/padding/groups")
            elif nd.out_ch % nd.groups != 0:
                v.append(f"{tag}: groups {nd.groups} does not divide out_ch {nd.out_ch}")
            if nd.bias is not None and nd.bias.shape != (nd.out_ch,):
                v.append(f"{tag}: conv bias length mismatch")
        elif isinstance(nd, BatchNorm):
            n = nd.gamma.shape[0]
            if any(
                getattr(nd, f).shape != (n,)
                for f in ("beta", "running_mean", "running_var")
            ):
                v.append(f"{tag}: batch norm arrays disagree in length")
                continue
            if not all(
                _finite(getattr(nd, f))
                for f in ("gamma", "beta", "running_mean", "running_var")
            ):
                v.append(f"{tag}: batch norm has non-finite parameters")
            if nd.eps < 0:
                v.append(f"{tag}: batch norm eps must be >= 0")
            if np.any(nd.running_var < 0):
                v.append(f"{tag}: batch norm running_var must be >= 0")
            prev = nodes[i - 1] if i > 0 else None
            if not isinstance(prev, (Conv2d, Linear)):
                v.append(f"{tag}: batch norm must immediately follow conv or linear")
            else:
                out = prev.out_ch if isinstance(prev, Conv2d) else prev.out_features
                if n != out:
                    v.append(f"{tag}: bn length mismatch ({n} vs {out} channels)")
        elif isinstance(nd, Pool):
            if nd.kind not in ("avg", "max"):
                v.append(f"{tag}: pool kind must be avg or max")
            if nd.kernel < 1 or nd.stride < 1:
                v.append(f"{tag}: bad pool kernel/stride")
        elif isinstance(nd, Linear):
            if nd.weights.ndim != 2 or nd.bias.shape != (nd.out_features,):
                v.append(f"{tag}: linear weights must be (out, in) with matching bias")
            elif not (_finite(nd.weights) and _finite(nd.bias)):
                v.append(f"{tag}: linear has non-finite parameters")

    # residual markers: balanced, unnested, shape-preserving
    depth = 0
    for i, nd in enumerate(nodes):
        if isinstance(nd, ResidualBlockBegin):
            depth += 1
            if depth > 1:
                v.append(f"node {i}: nested residual blocks are not supported")
        elif isinstance(nd, ResidualBlockEnd):
            depth -= 1
            if depth < 0:
                v.append(f"node {i}: residual end without matching begin")
                depth = 0
    if depth > 0:
        v.append("residual begin without matching end")

    # shape propagation; stops at the first inconsistency
    if not v or all("input shape" not in s for s in v):
        shape = net.input_shape
        stack = []
        for i, nd in enumerate(nodes):
            if shape is None:
                break
            if isinstance(nd, ResidualBlockBegin):
                stack.append(shape)
                continue
            if isinstance(nd, ResidualBlockEnd):
                if stack:
                    saved = stack.pop()
                    if saved != shape:
                        v.append(
                            f"node {i}: residual add shape mismatch "
                            f"({saved} vs {shape})"
                        )
                        shape = None
                continue
            msgs = []
            shape = _node_shape(nd, shape, msgs.append)
            v.extend(f"node {i}: {m}" for m in msgs)
    return v


def check(net: NetworkIR) -> None:
    violations = validate(net)
    if violations:
        raise InvalidNetworkError(violations)


def infer_shapes(net: NetworkIR) -> list[tuple[int, ...]]:
    """Shape after each node for a valid network."""
    check(net)
    shapes = []
    shape = net.input_shape
    stack = []
    for nd in net.nodes:
        if isinstance(nd, ResidualBlockBegin):
            stack.append(shape)
        elif isinstance(nd, ResidualBlockEnd):
            shape = stack.pop()
        else:
            shape = _node_shape(nd, shape, lambda m: None)
        shapes.append(shape)
    return shapes


def prunable_units(net: NetworkIR) -> list[PrunableUnit]:
    """Every conv -> BN -> activation triple whose output channels can be
    removed without breaking a residual skip sum or a group structure.

    Depthwise convs never head a unit: their channels are locked 1:1 to
    their input, so they shrink as consumers of the conv that feeds them.
    """
    check(net)
    nodes = net.nodes
    units = []
    for i, nd in enumerate(nodes):
        if not isinstance(nd, Conv2d) or nd.groups != 1:
            continue
        if i + 2 >= len(nodes):
            continue
        if not (
            isinstance(nodes[i + 1], BatchNorm)
            and isinstance(nodes[i + 2], Activation)
        ):
            continue
        consumers = _trace_consumers(nodes, i + 2)
        if consumers is not None:
            units.append(PrunableUnit(i, i + 1, i + 2, tuple(consumers)))
    return units


def _trace_consumers(nodes, act_index):
    """Node indices that must shrink with the unit's output channels, or
    None if the channels feed something we must not touch (skip-add,
    non-depthwise grouped conv, or the network output)."""
    consumers: list[int] = []
    j = act_index + 1
    while j < len(nodes):
        nd = nodes[j]
        if isinstance(nd, Conv2d):
            if nd.groups == 1:
                consumers.append(j)
                return consumers
            if nd.is_depthwise:
                consumers.append(j)
                if j + 1 < len(nodes) and isinstance(nodes[j + 1], BatchNorm):
                    consumers.append(j + 1)
                    j += 2
                else:
                    j += 1
                continue
            return None
        if isinstance(nd, Linear):
            consumers.append(j)
            return consumers
        if isinstance(nd, (Activation, Pool, GlobalAvgPool, Flatten)):
            j += 1
            continue
        # BatchNorm not paired with a traced depthwise conv, or residual
        # markers: the channel set is shared with something else
        return None
    return None


def count_conv_params(net: NetworkIR) -> int:
    n = 0
    for nd in net.nodes:
        if isinstance(nd, Conv2d):
            n += nd.weights.size + (nd.bias.size if nd.bias is not None else 0)
    return int(n)


def count_params(net: NetworkIR) -> int:
    """Conv plus linear parameters (weights and biases); BN excluded."""
    n = count_conv_params(net)
    for nd in net.nodes:
        if isinstance(nd, Linear):
            n += nd.weights.size + nd.bias.size
    return int(n)


def count_conv_flops(net: NetworkIR) -> int:
    """2 * k^2 * (in/groups) * out * H_out * W_out per conv layer."""
    check(net)
    total = 0
    shape = net.input_shape
    stack = []
    for nd in net.nodes:
        if isinstance(nd, ResidualBlockBegin):
            stack.append(shape)
            continue
        if isinstance(nd, ResidualBlockEnd):
            shape = stack.pop()
            continue
        out = _node_shape(nd, shape, lambda m: None)
        if isinstance(nd, Conv2d):
            _, oh, ow = out
            total += 2 * nd.kernel**2 * (nd.in_ch // nd.groups) * nd.out_ch * oh * ow
        shape = out
    return int(total)


def count_flops(net: NetworkIR) -> int:
    """Conv plus linear FLOPs (2 per multiply-add); BN/activation/pool free."""
    total = count_conv_flops(net)
    for nd in net.nodes:
        if isinstance(nd, Linear):
            total += 2 * nd.in_features * nd.out_features
    return int(total)


def clone(net: NetworkIR) -> NetworkIR:
    return copy.deepcopy(net)


def equal(a: NetworkIR, b: NetworkIR) -> bool:
    """Field-for-field equality with bit-exact arrays."""
    if (a.input_shape, a.name, a.version) != (b.input_shape, b.name, b.version):
        return False
    if len(a.nodes) != len(b.nodes):
        return False
    for x, y in zip(a.nodes, b.nodes):
        if type(x) is not type(y):
            return False
        for f in x.__dataclass_fields__:
            fx, fy = getattr(x, f), getattr(y, f)
            if isinstance(fx, np.ndarray) or isinstance(fy, np.ndarray):
                if fx is None or fy is None:
                    return False
                if fx.shape != fy.shape or not np.array_equal(fx, fy):
                    return False
            elif fx != fy:
                return False
    return True
