"""Exponentiated-gradient combination of node densities.

The mixture density is ``p(x) = sum_i w_i f_i(x)`` with ``w`` on the
probability simplex.  After each observation the weights are multiplied by
``exp(theta * f_i(x) / p(x))`` and renormalised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

#: floor that keeps the log-loss finite when every expert assigns zero density
MIN_DENSITY = 1e-300
LOG_MIN_DENSITY = math.log(MIN_DENSITY)

DEFAULT_THETA = 0.01


@dataclass
class EGTuning:
    """Constants of the log-loss regret bound.

    loss_bound_A bounds the per-round log-loss of the best fixed combination,
    density_bound_R bounds every expert density, horizon_T is the trial length.
    """

    loss_bound_A: float
    density_bound_R: float
    horizon_T: int

    def __post_init__(self) -> None:
        if min(self.loss_bound_A, self.density_bound_R, self.horizon_T) <= 0:
            raise ValueError("all tuning constants must be positive")


def mixture_log_density(weights: ArrayLike, log_f: ArrayLike) -> float:
    """``log sum_i w_i f_i`` evaluated from log-densities, floored at MIN_DENSITY."""
    w = np.asarray(weights, dtype=float)
    log_f = np.asarray(log_f, dtype=float)
    mask = w > 0
    if not mask.any():
        return LOG_MIN_DENSITY
    # add log-weights instead of passing b=w: subnormal weights overflow scipy's rescaling
    val = float(logsumexp(log_f[mask] + np.log(w[mask])))
    return max(val, LOG_MIN_DENSITY)


def mixture_density(weights: ArrayLike, densities: ArrayLike) -> float:
    """Convex combination of expert densities.

    Zero densities are allowed; the sum is taken in log space.
    """
    d = np.asarray(densities, dtype=float)
    if np.any(d < 0):
        raise ValueError("densities must be non-negative")
    with np.errstate(divide="ignore"):
        return math.exp(mixture_log_density(weights, np.log(d)))


def eg_update_log(weights: ArrayLike, log_f: ArrayLike, log_p: float,
                  theta: float = DEFAULT_THETA) -> NDArray[np.float64]:
    """EG step with densities given as logs; ``f_i / p`` is formed as
    ``exp(log_f_i - log_p)``."""
    w = np.asarray(weights, dtype=float)
    # f_i / p <= 1 / w_i is unbounded for vanishing weights; cap before exp
    ratio = np.exp(np.minimum(np.asarray(log_f, dtype=float) - log_p, 700.0))
    expo = theta * ratio
    expo -= expo.max()
    new = w * np.exp(expo)
    total = new.sum()
    if not total > 0.0 or not np.isfinite(total):
        # every positive-weight expert underflowed; keep the old weights
        return w / w.sum()
    return new / total


def eg_update(weights: ArrayLike, f: ArrayLike, p: float,
              theta: float = DEFAULT_THETA) -> NDArray[np.float64]:
    """Multiplicative update ``w_i <- w_i exp(theta f_i / p)`` then renormalise.

    >>> eg_update([0.5, 0.5], [0.4, 0.1], 0.25).round(4)
    array([0.6457, 0.3543])
    """
    if not p > 0:
        raise ValueError("mixture density must be positive")
    with np.errstate(divide="ignore"):
        return eg_update_log(weights, np.log(np.asarray(f, dtype=float)), math.log(p), theta)


def redistribute_on_split(weights: ArrayLike, parent: int, children: tuple[int, int],
                          xi: float) -> NDArray[np.float64]:
    """Parent keeps ``xi * w``; each child receives ``(1 - xi) * w / 2``.

    ``weights`` must already contain slots for the children (normally zeros).
    """
    w = np.array(weights, dtype=float)
    kept = xi * w[parent]
    share = 0.5 * (w[parent] - kept)
    w[parent] = kept
    for c in children:
        w[c] += share
    return w


def theoretical_theta(tuning: EGTuning, n_experts: int) -> float:
    """Learning rate ``2 sqrt(ln N) / (R sqrt(2 A T) + R^2 sqrt(ln N))``."""
    if n_experts < 2:
        raise ValueError("need at least two experts")
    ln_n = math.log(n_experts)
    r, a, t = tuning.density_bound_R, tuning.loss_bound_A, tuning.horizon_T
    return 2.0 * math.sqrt(ln_n) / (r * math.sqrt(2.0 * a * t) + r * r * math.sqrt(ln_n))


def regret_bound(tuning: EGTuning, n_experts: int) -> float:
    """``sqrt(2 A T ln N) + R^2 ln N / 2``."""
    ln_n = math.log(n_experts)
    return (math.sqrt(2.0 * tuning.loss_bound_A * tuning.horizon_T * ln_n)
            + tuning.density_bound_R ** 2 * ln_n / 2.0)
