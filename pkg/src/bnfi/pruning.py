"""Structural pruning: plans and their application.

A plan lists, per prunable unit, the output channels to drop.  Applying
it slices conv output rows, BN entries and every consumer's input side in
lockstep; surviving weights are bit-identical to the originals and the
result always validates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import ir
from .criteria import CriterionId, LayerContext, rank_channels, score_unit
from .importance import GaussianChannel, QuadratureConfig


@dataclass(frozen=True)
class PlanEntry:
    unit: ir.PrunableUnit
    remove: tuple[int, ...]  # sorted, unique, strict subset of the channels


@dataclass(frozen=True)
class PruningPlan:
    entries: tuple[PlanEntry, ...]


def layer_context(net: ir.NetworkIR, unit: ir.PrunableUnit) -> LayerContext:
    conv = net.nodes[unit.conv_index]
    bn = net.nodes[unit.bn_index]
    act = net.nodes[unit.act_index]
    channels = [GaussianChannel(g, b) for g, b in zip(bn.gamma, bn.beta)]
    return LayerContext(conv.weights, channels, act.fn)


def _check_entry(net, unit, remove):
    out_ch = net.nodes[unit.conv_index].out_ch
    if len(set(remove)) != len(remove):
        raise ValueError("duplicate channels in plan entry")
    if any(c < 0 or c >= out_ch for c in remove):
        raise ValueError(f"channel out of range for unit at node {unit.conv_index}")
    if len(remove) >= out_ch:
        raise ValueError(
            f"plan would empty the unit at node {unit.conv_index} "
            f"({len(remove)} of {out_ch} channels)"
        )


def make_plan(
    net: ir.NetworkIR,
    criterion: CriterionId,
    ratios: list[float],
    order: str = "ascending",
    cfg: QuadratureConfig = QuadratureConfig(),
) -> PruningPlan:
    """Per unit i, drop the first floor(r_i * C_i) channels of the
    importance ranking in the requested order."""
    units = ir.prunable_units(net)
    if len(ratios) != len(units):
        raise ValueError(f"got {len(ratios)} ratios for {len(units)} prunable units")
    entries = []
    for unit, r in zip(units, ratios):
        if not 0.0 <= r < 1.0:
            raise ValueError(f"ratio {r} outside [0, 1)")
        if r == 0.0:
            continue
        # criterion errors surface even when k floors to zero
        ranking = rank_channels(score_unit(criterion, layer_context(net, unit), cfg), order)
        k = math.floor(r * net.nodes[unit.conv_index].out_ch)
        if k == 0:
            continue
        remove = tuple(sorted(int(c) for c in ranking[:k]))
        _check_entry(net, unit, remove)
        entries.append(PlanEntry(unit=unit, remove=remove))
    return PruningPlan(entries=tuple(entries))


def uniform_plan(net, criterion, ratio, order="ascending", cfg=QuadratureConfig()):
    return make_plan(net, criterion, [ratio] * len(ir.prunable_units(net)), order, cfg)


def _keep_mask(n: int, remove) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[list(remove)] = False
    return mask


def _slice_bn(bn: ir.BatchNorm, keep) -> ir.BatchNorm:
    return ir.BatchNorm(
        gamma=bn.gamma[keep],
        beta=bn.beta[keep],
        running_mean=bn.running_mean[keep],
        running_var=bn.running_var[keep],
        eps=bn.eps,
    )


def apply_plan(net: ir.NetworkIR, plan: PruningPlan) -> ir.NetworkIR:
    """A new, smaller network; the input net is left untouched."""
    shapes = ir.infer_shapes(net)
    out = ir.clone(net)
    for entry in plan.entries:
        unit, remove = entry.unit, entry.remove
        conv = out.nodes[unit.conv_index]
        if not isinstance(conv, ir.Conv2d):
            raise ValueError(f"plan does not match net: node {unit.conv_index}")
        _check_entry(out, unit, remove)
        keep = _keep_mask(conv.out_ch, remove)

        conv.weights = conv.weights[keep]
        if conv.bias is not None:
            conv.bias = conv.bias[keep]
        out.nodes[unit.bn_index] = _slice_bn(out.nodes[unit.bn_index], keep)

        for ci in unit.consumers:
            consumer = out.nodes[ci]
            if isinstance(consumer, ir.Conv2d):
                if consumer.is_depthwise:
                    consumer.weights = consumer.weights[keep]
                    if consumer.bias is not None:
                        consumer.bias = consumer.bias[keep]
                    consumer.groups = int(keep.sum())
                else:
                    consumer.weights = consumer.weights[:, keep]
            elif isinstance(consumer, ir.BatchNorm):
                out.nodes[ci] = _slice_bn(consumer, keep)
            elif isinstance(consumer, ir.Linear):
                # features are channel-major: one column group of h*w per channel
                h_w = _spatial_at_linear(net, shapes, ci)
                col_keep = np.repeat(keep, h_w)
                consumer.weights = consumer.weights[:, col_keep]
            else:
                raise ValueError(f"unexpected consumer node {type(consumer).__name__}")
    ir.check(out)
    return out


def _spatial_at_linear(net, shapes, linear_index: int) -> int:
    """h*w group size of the flattened features feeding a linear node."""
    for j in range(linear_index - 1, -1, -1):
        if isinstance(net.nodes[j], ir.Flatten):
            c, h, w = shapes[j - 1]
            return h * w
    raise ValueError("linear consumer without a flatten ancestor")


def plan_to_json(plan: PruningPlan) -> str:
    payload = [
        {
            "conv_index": e.unit.conv_index,
            "bn_index": e.unit.bn_index,
            "act_index": e.unit.act_index,
            "consumers": list(e.unit.consumers),
            "remove": list(e.remove),
        }
        for e in plan.entries
    ]
    return json.dumps({"entries": payload}, indent=2)


def plan_from_json(text: str) -> PruningPlan:
    data = json.loads(text)
    entries = tuple(
        PlanEntry(
            unit=ir.PrunableUnit(
                conv_index=int(e["conv_index"]),
                bn_index=int(e["bn_index"]),
                act_index=int(e["act_index"]),
                consumers=tuple(int(c) for c in e["consumers"]),
            ),
            remove=tuple(sorted(int(c) for c in e["remove"])),
        )
        for e in data["entries"]
    )
    return PruningPlan(entries=entries)
