"""Per-filter importance criteria under one interface.

Every criterion maps the state of one prunable unit (filter weights, BN
channels, activation) to one score per output channel.  Higher score =
more important.  BN-statistics criteria ignore the filter weights and
vice versa, which the tests pin down as invariants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import ActivationFn
from .importance import (
    GaussianChannel,
    QuadratureConfig,
    expected_abs_activation,
    nonzero_expected_abs_activation,
)

CRITERION_KINDS = ("bnfi", "bnfi_n", "l1", "fpgm", "gamma_mag", "random")

# stable CLI spellings
_CLI_NAMES = {
    "bnfi": "bnfi",
    "bnfi_n": "bnfi-n",
    "l1": "l1",
    "fpgm": "fpgm",
    "gamma_mag": "gamma",
    "random": "random",
}
_FROM_CLI = {v: k for k, v in _CLI_NAMES.items()}


@dataclass(frozen=True)
class CriterionId:
    kind: str
    seed: int = 0  # used by "random" only

    def __post_init__(self):
        if self.kind not in CRITERION_KINDS:
            raise ValueError(f"unknown criterion kind: {self.kind!r}")

    @property
    def cli_name(self) -> str:
        return _CLI_NAMES[self.kind]


def parse_criterion(name: str, seed: int = 0) -> CriterionId:
    """Map a CLI spelling ("bnfi-n", "gamma", ...) to a CriterionId."""
    try:
        return CriterionId(_FROM_CLI[name], seed)
    except KeyError:
        raise ValueError(f"unknown criterion name: {name!r}") from None


@dataclass
class LayerContext:
    """Everything a criterion may look at for one prunable unit."""

    filter_weights: np.ndarray  # (C_out, C_in_per_group, k, k)
    bn: list[GaussianChannel]  # length C_out
    activation: ActivationFn

    def __post_init__(self):
        self.filter_weights = np.asarray(self.filter_weights, dtype=np.float64)
        if self.filter_weights.ndim != 4:
            raise ValueError("filter_weights must be 4-d")
        if len(self.bn) != self.filter_weights.shape[0]:
            raise ValueError("bn length must equal the output channel count")
        if not np.all(np.isfinite(self.filter_weights)):
            raise ValueError("filter weights must be finite")


@dataclass
class ImportanceVector:
    scores: np.ndarray  # (C_out,)
    criterion: CriterionId


def geometric_median(
    points: np.ndarray, tol: float = 1e-10, max_iter: int = 1000
) -> np.ndarray:
    """Point minimizing the sum of Euclidean distances (Weiszfeld).

    When an iterate coincides with an input point the plain update is
    undefined; the modified rule of Vardi & Zhang is applied: the point is
    optimal if the pull of the remaining points is weak enough, otherwise
    the iterate is nudged off it.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("need >= 2 points of equal dimension")
    y = pts.mean(axis=0)
    for _ in range(max_iter):
        d = np.linalg.norm(pts - y, axis=1)
        on_point = d < 1e-15
        if on_point.all():
            return y  # all inputs coincide with the iterate
        inv = np.zeros_like(d)
        inv[~on_point] = 1.0 / d[~on_point]
        t = pts[~on_point].T @ inv[~on_point] / inv.sum()
        if on_point.any():
            # Vardi-Zhang: r is the residual pull at the coinciding point
            r = ((pts[~on_point] - y).T @ inv[~on_point])
            rnorm = np.linalg.norm(r)
            eta = float(on_point.sum())
            if rnorm <= eta:
                return y
            step = min(1.0, eta / rnorm)
            y_next = (1.0 - step) * t + step * y
        else:
            y_next = t
        if np.linalg.norm(y_next - y) < tol:
            return y_next
        y = y_next
    return y


def score_unit(
    criterion: CriterionId,
    ctx: LayerContext,
    cfg: QuadratureConfig = QuadratureConfig(),
) -> ImportanceVector:
    """One importance score per output channel of the unit."""
    kind = criterion.kind
    if kind == "bnfi":
        scores = np.array(
            [nonzero_expected_abs_activation(ctx.activation, ch, cfg) for ch in ctx.bn]
        )
    elif kind == "bnfi_n":
        scores = np.array(
            [expected_abs_activation(ctx.activation, ch, cfg) for ch in ctx.bn]
        )
    elif kind == "l1":
        scores = np.abs(ctx.filter_weights).sum(axis=(1, 2, 3))
    elif kind == "gamma_mag":
        scores = np.array([ch.sigma for ch in ctx.bn])
    elif kind == "fpgm":
        flat = ctx.filter_weights.reshape(ctx.filter_weights.shape[0], -1)
        if flat.shape[0] < 2:
            raise ValueError("fpgm needs at least two filters in the unit")
        median = geometric_median(flat)
        scores = np.linalg.norm(flat - median, axis=1)
    elif kind == "random":
        rng = np.random.default_rng(criterion.seed)
        scores = rng.random(ctx.filter_weights.shape[0])
    else:  # pragma: no cover - guarded by CriterionId
        raise ValueError(kind)
    return ImportanceVector(scores=scores.astype(np.float64), criterion=criterion)


def rank_channels(iv: ImportanceVector, order: str = "ascending") -> np.ndarray:
    """Channel indices sorted by score; ties broken by lower index."""
    if order == "ascending":
        return np.argsort(iv.scores, kind="stable")
    if order == "descending":
        return np.argsort(-iv.scores, kind="stable")
    raise ValueError(f"order must be 'ascending' or 'descending', got {order!r}")
