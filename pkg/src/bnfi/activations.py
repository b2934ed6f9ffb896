"""Activation functions described structurally.

An activation carries, besides its evaluation rule, an explicit list of
closed intervals on which it is exactly zero.  The zero set is what makes
an activation "sparsity inducing" (positive Gaussian measure), and its
finite endpoints double as breakpoints for piecewise quadrature, so custom
activations slot into the importance machinery without name-based special
cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Interval = tuple[float, float]

KINDS = ("identity", "relu", "leaky_relu", "swish")


@dataclass(frozen=True)
class ActivationFn:
    """A tagged activation with an explicit zero set.

    zero_set is a tuple of closed intervals (lo, hi) on which g(x) == 0
    exactly.  Measure-zero roots (the single point 0 for identity, leaky
    ReLU and swish) are represented by the empty tuple.
    """

    kind: str
    alpha: float = 0.01
    zero_set: tuple[Interval, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown activation kind: {self.kind!r}")
        for lo, hi in self.zero_set:
            if not lo <= hi:
                raise ValueError(f"bad zero interval ({lo}, {hi})")

    def __call__(self, x):
        """Evaluate g elementwise on a float or ndarray."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        if self.kind == "leaky_relu":
            return np.where(x > 0.0, x, self.alpha * x)
        # swish: x * sigmoid(x); the two-branch form never overflows exp
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = x[pos] / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = x[~pos] * ex / (1.0 + ex)
        return out

    def grad(self, x):
        """dg/dx elementwise (subgradient 0 at the ReLU kink)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "identity":
            return np.ones_like(x)
        if self.kind == "relu":
            return (x > 0.0).astype(np.float64)
        if self.kind == "leaky_relu":
            return np.where(x > 0.0, 1.0, self.alpha)
        sig = 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))
        return sig + x * sig * (1.0 - sig)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Points where |g| is not smooth; quadrature splits here.

        Finite endpoints of the zero set, plus the origin where every
        built-in kind has either a kink or a sign change of g.
        """
        pts = {0.0}
        for lo, hi in self.zero_set:
            if math.isfinite(lo):
                pts.add(lo)
            if math.isfinite(hi):
                pts.add(hi)
        return tuple(sorted(pts))


def identity() -> ActivationFn:
    return ActivationFn("identity")


def relu() -> ActivationFn:
    return ActivationFn("relu", zero_set=((-math.inf, 0.0),))


def leaky_relu(alpha: float = 0.01) -> ActivationFn:
    if alpha == 0.0:
        # slope 0 degenerates to ReLU's zero set
        return ActivationFn("leaky_relu", alpha=0.0, zero_set=((-math.inf, 0.0),))
    return ActivationFn("leaky_relu", alpha=alpha)


def swish() -> ActivationFn:
    return ActivationFn("swish")


_FACTORIES = {
    "identity": identity,
    "relu": relu,
    "swish": swish,
}


def make_activation(kind: str, alpha: float = 0.01) -> ActivationFn:
    """Build an activation by name with the canonical zero set."""
    if kind == "leaky_relu":
        return leaky_relu(alpha)
    try:
        return _FACTORIES[kind]()
    except KeyError:
        raise ValueError(f"unknown activation kind: {kind!r}") from None


def eval_activation(fn: ActivationFn, x: float) -> float:
    """Scalar evaluation of g(x)."""
    return float(fn(np.float64(x)))
