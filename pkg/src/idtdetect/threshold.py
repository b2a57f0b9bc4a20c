"""Adaptive thresholding of density scores.

A sample is flagged anomalous (+1) when its score falls strictly below the
threshold ``tau``, normal (-1) otherwise.  Whenever the true label is revealed
``tau`` takes a projected gradient step on the cost-weighted logistic loss
``C_d * log(1 + exp((p - tau) * d))`` with step ``1 / (H k)``, ``H`` being the
loss's strong-convexity constant over the feasible interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ANOMALY = 1
NORMAL = -1


@dataclass(frozen=True)
class CostPair:
    """Costs of a miss (true anomaly declared normal) and of a false alarm.

    A zero cost is accepted so the ROC cost grid can include it; the step
    size then uses the smallest positive cost.
    """

    miss: float = 1.0
    false_alarm: float = 1.0

    def __post_init__(self) -> None:
        if self.miss < 0 or self.false_alarm < 0 or max(self.miss, self.false_alarm) <= 0:
            raise ValueError("costs must be non-negative and not both zero")

    def of(self, d: int) -> float:
        return self.miss if d == ANOMALY else self.false_alarm

    @property
    def c_max(self) -> float:
        return max(self.miss, self.false_alarm)

    @property
    def c_min(self) -> float:
        return min(c for c in (self.miss, self.false_alarm) if c > 0)


def _check_label(d: int) -> None:
    if d not in (ANOMALY, NORMAL):
        raise ValueError(f"label must be +1 or -1, got {d!r}")


def decide(tau: float, p: float) -> int:
    return ANOMALY if p < tau else NORMAL


def zero_one_loss(tau: float, p: float, d: int, costs: CostPair) -> float:
    _check_label(d)
    return costs.of(d) if decide(tau, p) != d else 0.0


def logistic_loss(tau: float, p: float, d: int, costs: CostPair) -> float:
    _check_label(d)
    return costs.of(d) * float(np.logaddexp(0.0, (p - tau) * d))


def logistic_grad(tau: float, p: float, d: int, costs: CostPair) -> float:
    """Derivative of :func:`logistic_loss` with respect to ``tau``."""
    _check_label(d)
    return -d * costs.of(d) / (1.0 + math.exp((tau - p) * d))


def project(x, lo: float, hi: float):
    """Euclidean projection onto ``[lo, hi]``."""
    return np.clip(x, lo, hi)


def step_size(k: int, costs: CostPair, diameter: float) -> float:
    """``(1 + e^D)^2 / (k C_min e^D)`` for the k-th feedback round."""
    if k < 1:
        raise ValueError("step index starts at 1")
    e = math.exp(diameter)
    return (1.0 + e) ** 2 / (k * costs.c_min * e)


@dataclass
class ThresholdState:
    """Current threshold, feasible interval ``[lo, hi]`` and feedback count."""

    tau: float
    lo: float = 0.0
    hi: float = 1.0
    round_index: int = 0

    def __post_init__(self) -> None:
        if not self.hi > self.lo:
            raise ValueError("feasible interval must have positive width")
        if not self.lo <= self.tau <= self.hi:
            raise ValueError("tau outside feasible interval")

    @classmethod
    def centered(cls, lo: float = 0.0, hi: float = 1.0) -> "ThresholdState":
        return cls(0.5 * (lo + hi), lo, hi)

    @property
    def diameter(self) -> float:
        return self.hi - self.lo


def ogd_step(state: ThresholdState, p: float, d: int | None, costs: CostPair,
             alpha: float | None = None) -> ThresholdState:
    """One projected gradient step; a round without feedback (``d is None``)
    leaves the state untouched.

    ``alpha`` defaults to :func:`step_size` at the next feedback index.
    """
    if d is None:
        return state
    _check_label(d)
    k = state.round_index + 1
    if alpha is None:
        alpha = step_size(k, costs, state.diameter)
    tau = state.tau - alpha * logistic_grad(state.tau, p, d, costs)
    return ThresholdState(float(project(tau, state.lo, state.hi)), state.lo, state.hi, k)


class ThresholdBank:
    """Several independent thresholds updated in lockstep, one per
    false-alarm cost, sharing a miss cost and feasible interval.

    Used to sweep a cost grid over the same score trace.
    """

    def __init__(self, false_alarm_costs, miss_cost: float = 1.0,
                 lo: float = 0.0, hi: float = 1.0):
        self.c_fa = np.asarray(false_alarm_costs, dtype=float).reshape(-1)
        self.c_miss = float(miss_cost)
        if np.any(self.c_fa < 0) or self.c_miss < 0:
            raise ValueError("costs must be non-negative")
        if not hi > lo:
            raise ValueError("feasible interval must have positive width")
        self.lo, self.hi = float(lo), float(hi)
        self.tau = np.full(self.c_fa.shape, 0.5 * (self.lo + self.hi))
        self.k = 0
        e = math.exp(self.hi - self.lo)
        c_min = np.array([CostPair(self.c_miss, c).c_min for c in self.c_fa])
        self._alpha_unit = (1.0 + e) ** 2 / (c_min * e)

    def decide(self, score: float) -> np.ndarray:
        return np.where(score < self.tau, ANOMALY, NORMAL)

    def update(self, score: float, d: int | None) -> None:
        if d is None:
            return
        _check_label(d)
        self.k += 1
        alpha = self._alpha_unit / self.k
        c = self.c_miss if d == ANOMALY else self.c_fa
        step = alpha * d * c / (1.0 + np.exp((self.tau - score) * d))
        self.tau = np.clip(self.tau + step, self.lo, self.hi)
