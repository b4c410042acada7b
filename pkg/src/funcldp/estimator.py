"""Index-weighted kernel regression for curve-valued covariates.

The estimator averages an index of the responses over the observations
whose curves fall within bandwidth ``h`` of the evaluation point.  The
component sums are normalized by ``n * phi(h)`` where ``phi`` is the
model's small-ball scale, so they sit directly on the scale used by the
rare-event experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .funcdata import Curve, Grid, Kernel, SemiMetric

_INTERVAL = tuple[float, float]


@dataclass(frozen=True)
class IdentityIndex:
    """Index l(v) = v; the plain regression case."""

    sup_bound: float = math.inf

    def __call__(self, v):
        return np.asarray(v, dtype=float)


@dataclass(frozen=True)
class IntervalIndicator:
    """Index l(v) = 1 when v lies in a finite union of intervals.

    Intervals are closed; infinite endpoints are allowed.
    """

    intervals: tuple[_INTERVAL, ...]
    sup_bound: float = 1.0

    def __post_init__(self):
        if not self.intervals:
            raise ValueError("indicator index needs at least one interval")
        for lo, hi in self.intervals:
            if not lo < hi:
                raise ValueError(f"degenerate interval ({lo}, {hi})")

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        member = np.zeros_like(v, dtype=bool)
        for lo, hi in self.intervals:
            member |= (v >= lo) & (v <= hi)
        return member.astype(float)


@dataclass(frozen=True)
class LipschitzIndex:
    """Bounded Lipschitz index supplied as a callable with a declared sup bound."""

    fn: Callable[[np.ndarray], np.ndarray]
    sup_bound: float
    tag: str = "lipschitz"

    def __post_init__(self):
        if not math.isfinite(self.sup_bound):
            raise ValueError("a bounded Lipschitz index must declare a finite sup bound")

    def __call__(self, v):
        return np.asarray(self.fn(np.asarray(v, dtype=float)), dtype=float)


IndexFunction = IdentityIndex | IntervalIndicator | LipschitzIndex


class Dataset:
    """Pairs (X_i, Y_i) of curves and real responses on one shared grid."""

    def __init__(self, grid: Grid, x_values: np.ndarray, y: np.ndarray):
        x_values = np.asarray(x_values, dtype=float)
        y = np.asarray(y, dtype=float)
        if x_values.ndim != 2 or x_values.shape[1] != grid.points:
            raise ValueError(f"x_values must be (n, {grid.points}), got {x_values.shape}")
        if y.shape != (x_values.shape[0],):
            raise ValueError(f"y must have length {x_values.shape[0]}, got {y.shape}")
        if x_values.shape[0] < 1:
            raise ValueError("dataset needs at least one pair")
        if not (np.all(np.isfinite(x_values)) and np.all(np.isfinite(y))):
            raise ValueError("dataset values must all be finite")
        self.grid = grid
        self.x_values = x_values
        self.y = y
        self.x_values.flags.writeable = False
        self.y.flags.writeable = False

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[Curve, float]]) -> "Dataset":
        if not pairs:
            raise ValueError("dataset needs at least one pair")
        grid = pairs[0][0].grid
        for x, _ in pairs:
            if x.grid != grid:
                raise ValueError("all curves in a dataset must share one grid")
        x_values = np.vstack([x.values for x, _ in pairs])
        y = np.array([float(v) for _, v in pairs])
        return cls(grid, x_values, y)

    @property
    def n(self) -> int:
        return self.x_values.shape[0]

    def curve(self, i: int) -> Curve:
        return Curve(self.grid, self.x_values[i])


@dataclass(frozen=True)
class EstimatorConfig:
    """Kernel, semi-metric, bandwidth and the small-ball scale at that bandwidth."""

    kernel: Kernel
    metric: SemiMetric
    bandwidth: float
    phi_of_h: float

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.phi_of_h <= 0:
            raise ValueError(f"phi_of_h must be positive, got {self.phi_of_h}")


@dataclass(frozen=True)
class RegressionEstimate:
    """Component sums and the ratio estimate at one evaluation curve.

    ``r_n1`` and ``r_n2`` are the kernel mass and index-weighted kernel
    mass, each normalized by ``n * phi_of_h``; ``r_hat`` is their ratio
    with the convention that an empty neighborhood yields 0.
    """

    r_n1: float
    r_n2: float
    r_hat: float
    active_count: int


def delta(x: Curve, xi: Curve, cfg: EstimatorConfig) -> float:
    """Kernel weight K(d(x, X_i)/h), hard-zeroed outside d/h <= 1."""
    u = cfg.metric.distance(x, xi) / cfg.bandwidth
    if u > 1.0:
        return 0.0
    return float(cfg.kernel.k(u))


def _weights(x: Curve, data: Dataset, cfg: EstimatorConfig) -> tuple[np.ndarray, np.ndarray]:
    if x.grid != data.grid:
        raise ValueError("evaluation curve and dataset live on different grids")
    d = cfg.metric.distance_to_rows(x.values, data.x_values, data.grid)
    u = d / cfg.bandwidth
    active = u <= 1.0
    w = np.where(active, cfg.kernel.k(np.clip(u, 0.0, 1.0)), 0.0)
    return w, active


def z_n(x: Curve, data: Dataset, index: IndexFunction, cfg: EstimatorConfig) -> RegressionEstimate:
    """Evaluate the estimator components at ``x`` over the whole dataset."""
    w, active = _weights(x, data, cfg)
    norm = data.n * cfg.phi_of_h
    r_n1 = float(np.sum(w)) / norm
    r_n2 = float(np.sum(index(data.y) * w)) / norm
    r_hat = r_n2 / r_n1 if r_n1 != 0.0 else 0.0
    return RegressionEstimate(r_n1, r_n2, r_hat, int(np.count_nonzero(active)))


@dataclass(frozen=True)
class LogMgfEstimate:
    """Monte-Carlo estimate of the scaled log moment generating function."""

    value: float
    overflow: bool


def finite_n_log_mgf(
    x: Curve,
    data_law: Callable[[np.random.Generator], Dataset],
    index: IndexFunction,
    cfg: EstimatorConfig,
    t1: float,
    t2: float,
    replicates: int,
    seed: int,
) -> LogMgfEstimate:
    """Estimate (1/(n phi(h))) log E exp{sum_i (t1 + t2 l(Y_i)) Delta_i(x)}.

    Each replicate draws an independent dataset from ``data_law`` with its
    own RNG stream; the replicate exponents are combined by log-sum-exp,
    so the reduction is deterministic and overflow-safe.  A replicate
    whose exponent is itself non-finite flags the estimate and yields an
    infinite value.
    """
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    exponents = np.empty(replicates)
    n = None
    for rep in range(replicates):
        rng = np.random.default_rng(np.random.SeedSequence((seed, rep)))
        data = data_law(rng)
        if n is None:
            n = data.n
        elif data.n != n:
            raise ValueError("data_law must produce datasets of a fixed size")
        w, _ = _weights(x, data, cfg)
        exponents[rep] = np.sum((t1 + t2 * index(data.y)) * w)
    if not np.all(np.isfinite(exponents)):
        return LogMgfEstimate(math.inf, True)
    log_mean = float(logsumexp(exponents) - math.log(replicates))
    return LogMgfEstimate(log_mean / (n * cfg.phi_of_h), False)
