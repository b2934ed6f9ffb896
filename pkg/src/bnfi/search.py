"""Per-layer pruning-ratio search and the pruning-ratio sweep harness.

The ratio search halves a bracket around the largest ratio whose accuracy
degradation stays under a budget, one prunable unit at a time, each
measured against the pristine network.  The sweep prunes every unit at
one uniform ratio per row and tabulates accuracy/params/FLOPs per
(criterion, order, ratio) for CSV emission.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import ir
from .criteria import CriterionId
from .engine.data import Dataset
from .engine.forward import accuracy
from .importance import QuadratureConfig
from .pruning import apply_plan, make_plan
from .format import format_sig


@dataclass(frozen=True)
class SearchCfg:
    delta: float  # accuracy-degradation budget per layer
    iterations: int = 5
    lower: float = 0.0
    upper: float = 0.95
    eval_split: str = "train"
    cumulative: bool = False  # search against the already-pruned net instead

    def __post_init__(self):
        # upper may be exactly 1: midpoints (the only evaluated and
        # returned ratios) stay strictly below it
        if not (0.0 <= self.lower < self.upper <= 1.0):
            raise ValueError("need 0 <= lower < upper <= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not np.isfinite(self.delta) or self.delta < 0:
            raise ValueError("delta must be finite and >= 0")


def bisect_pruning_ratio(
    v_base: float, accuracy_at: Callable[[float], float], cfg: SearchCfg
) -> float:
    """Iterative halving on the degradation |v_base - accuracy_at(m)|:
    a degradation at or above the budget shrinks the upper bound, so the
    result never exceeds it.  Returns the final bracket midpoint."""
    lo, hi = cfg.lower, cfg.upper
    for _ in range(cfg.iterations):
        mid = 0.5 * (lo + hi)
        degradation = abs(v_base - accuracy_at(mid))
        if degradation >= cfg.delta:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _unit_ratio_accuracy(net, unit_pos, criterion, cfg, quad, evaluator):
    """accuracy_at(m) that prunes only the unit at position unit_pos."""
    units = ir.prunable_units(net)

    def accuracy_at(m: float) -> float:
        ratios = [0.0] * len(units)
        ratios[unit_pos] = m
        plan = make_plan(net, criterion, ratios, "ascending", quad)
        return evaluator(apply_plan(net, plan))

    return accuracy_at


def search_layer_ratio(
    net: ir.NetworkIR,
    unit: ir.PrunableUnit,
    criterion: CriterionId,
    cfg: SearchCfg,
    evaluator: Callable[[ir.NetworkIR], float],
    quad: QuadratureConfig = QuadratureConfig(),
) -> float:
    """Largest pruning ratio for one unit whose measured degradation stays
    under cfg.delta, all other layers left intact."""
    units = ir.prunable_units(net)
    try:
        pos = units.index(unit)
    except ValueError:
        raise ValueError("unit is not a prunable unit of this net") from None
    v_base = evaluator(net)
    accuracy_at = _unit_ratio_accuracy(net, pos, criterion, cfg, quad, evaluator)
    return bisect_pruning_ratio(v_base, accuracy_at, cfg)


def search_all_ratios(
    net: ir.NetworkIR,
    criterion: CriterionId,
    cfg: SearchCfg,
    evaluator: Callable[[ir.NetworkIR], float],
    quad: QuadratureConfig = QuadratureConfig(),
) -> list[float]:
    """One ratio per prunable unit, in network order.  Each unit is
    searched independently against the unpruned net unless cfg.cumulative
    asks for the greedy compounding variant."""
    units = ir.prunable_units(net)
    ratios = []
    base = net
    for i in range(len(units)):
        v_base = evaluator(base)
        accuracy_at = _unit_ratio_accuracy(base, i, criterion, cfg, quad, evaluator)
        r = bisect_pruning_ratio(v_base, accuracy_at, cfg)
        ratios.append(r)
        if cfg.cumulative:
            partial = [0.0] * len(units)
            partial[i] = r
            base = apply_plan(base, make_plan(base, criterion, partial, "ascending", quad))
    return ratios


@dataclass
class SweepRow:
    criterion: str  # CLI spelling
    order: str  # "aoi" | "doi"
    ratio: float
    accuracy: float
    params: int
    flops: int


@dataclass
class SweepReport:
    baseline_accuracy: float
    rows: list[SweepRow] = field(default_factory=list)

    def to_csv(self, digits: int = 6) -> str:
        buf = io.StringIO()
        buf.write("criterion,order,ratio,accuracy,acc_drop,params,flops\n")
        for r in self.rows:
            drop = self.baseline_accuracy - r.accuracy
            buf.write(
                f"{r.criterion},{r.order},{format_sig(r.ratio, digits)},"
                f"{format_sig(r.accuracy, digits)},{format_sig(drop, digits)},"
                f"{r.params},{r.flops}\n"
            )
        return buf.getvalue()


_ORDER_NAMES = {"aoi": "ascending", "doi": "descending"}


def sweep(
    net: ir.NetworkIR,
    criteria: list[CriterionId],
    orders: list[str],
    ratios: list[float],
    dataset: Dataset,
    quad: QuadratureConfig = QuadratureConfig(),
    random_repeats: int = 3,
    jobs: int = 1,
) -> SweepReport:
    """Uniform-ratio pruning curves per criterion and order.  The random
    criterion is averaged over random_repeats seeds; row order and values
    are independent of the job count."""
    ir.check(net)
    if list(ratios) != sorted(set(ratios)):
        raise ValueError("ratios must be strictly increasing")
    for o in orders:
        if o not in _ORDER_NAMES:
            raise ValueError(f"order must be 'aoi' or 'doi', got {o!r}")
    v_base = accuracy(net, dataset)

    tasks = [(c, o, r) for c in criteria for o in orders for r in ratios]

    def run(task):
        criterion, order, ratio = task
        seeds = (
            range(criterion.seed, criterion.seed + random_repeats)
            if criterion.kind == "random"
            else [criterion.seed]
        )
        accs, params, flops = [], None, None
        for s in seeds:
            cid = CriterionId(criterion.kind, s)
            plan = make_plan(
                net,
                cid,
                [ratio] * len(ir.prunable_units(net)),
                _ORDER_NAMES[order],
                quad,
            )
            pruned = apply_plan(net, plan)
            accs.append(accuracy(pruned, dataset))
            params, flops = ir.count_params(pruned), ir.count_flops(pruned)
        return SweepRow(
            criterion=criterion.cli_name,
            order=order,
            ratio=ratio,
            accuracy=float(np.mean(accs)),
            params=params,
            flops=flops,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, tasks))
    else:
        rows = [run(t) for t in tasks]
    return SweepReport(baseline_accuracy=v_base, rows=rows)
