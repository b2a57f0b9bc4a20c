"""Comparison density estimators.

* ML   -- one Gaussian moment-matched to every normal sample seen so far.
* wKDE -- product-Gaussian KDE on the last ``ceil(sqrt(t))`` normal samples,
  per-dimension Silverman bandwidths.
* wGMM -- Gaussian mixture fitted by batch EM on the last ``ceil(ln t)``
  normal samples (at least ``max(2, K)``).

All three expose the same ``predict / learn / end_round`` protocol as the tree
model so they can be thresholded identically.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .exp_family import (
    COV_REG,
    LOG_2PI,
    GaussianMember,
    SufficientStatsAccumulator,
    cold_start_member,
    fit_moment_match,
    stat_dim,
    sufficient_stats,
)
from .mixture import LOG_MIN_DENSITY

KDE_MIN_BANDWIDTH = 1e-3


def ml_estimate(history: np.ndarray, d: int | None = None) -> GaussianMember:
    """Moment-matched Gaussian over ``history`` (rows are samples)."""
    history = np.asarray(history, dtype=float)
    if d is None:
        d = history.shape[1]
    acc = SufficientStatsAccumulator(stat_dim(d))
    for x in history.reshape(-1, d):
        acc.accumulate(sufficient_stats(x))
    return fit_moment_match(acc, d)


def silverman_bandwidth(window: np.ndarray) -> np.ndarray:
    """``h_j = sigma_j (4 / ((d + 2) n))^(1 / (d + 4))``, floored at 1e-3."""
    n, d = window.shape
    sigma = window.std(axis=0, ddof=1) if n > 1 else np.zeros(d)
    h = sigma * (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4))
    return np.maximum(h, KDE_MIN_BANDWIDTH)


def wkde_log_density(window: np.ndarray, x: np.ndarray) -> float:
    window = np.atleast_2d(np.asarray(window, dtype=float))
    h = silverman_bandwidth(window)
    z = (np.asarray(x, dtype=float) - window) / h
    log_k = -0.5 * np.sum(z * z, axis=1) - np.sum(np.log(h)) - 0.5 * len(h) * math.log(2 * math.pi)
    return float(logsumexp(log_k) - math.log(len(window)))


def wkde_estimate(window: np.ndarray, x: np.ndarray) -> float:
    return math.exp(wkde_log_density(window, x))


def kde_window_size(t: int) -> int:
    return math.ceil(math.sqrt(t))


def gmm_window_size(t: int, k: int) -> int:
    return max(math.ceil(math.log(t)) if t > 1 else 0, 2, k)


@dataclass
class GMMFit:
    weights: np.ndarray
    members: list[GaussianMember]
    log_likelihoods: list[float]

    def log_density(self, x) -> float:
        lp = np.array([m.log_density(x) for m in self.members])
        log_w = np.log(self.weights)
        return float(logsumexp(lp + (log_w[:, None] if lp.ndim > 1 else log_w)))


def _farthest_point_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [X[rng.integers(len(X))]]
    for _ in range(1, k):
        d2 = np.min(((X[:, None, :] - np.array(centers)[None]) ** 2).sum(-1), axis=1)
        centers.append(X[int(np.argmax(d2))])
    return np.array(centers)


def _regularize_batch(cov: np.ndarray, reg: float) -> np.ndarray:
    """:func:`regularize_covariance` applied to a stack of matrices."""
    w, v = np.linalg.eigh(cov)
    cov = np.einsum("kij,kj,klj->kil", v, np.clip(w, 0.0, None), v)
    d = cov.shape[-1]
    scale = np.maximum(np.trace(cov, axis1=1, axis2=2) / d, 1.0)
    return cov + (reg * scale)[:, None, None] * np.eye(d)


def _component_log_densities(X: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """``(n, k)`` Gaussian log-densities for stacked means/covariances."""
    d = X.shape[1]
    chol = np.linalg.cholesky(covs)
    diff = X[None, :, :] - means[:, None, :]                       # (k, n, d)
    z = np.linalg.solve(chol, diff.transpose(0, 2, 1))              # (k, d, n)
    log_det = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
    return (-0.5 * (d * LOG_2PI + log_det)[:, None] - 0.5 * (z * z).sum(axis=1)).T


def fit_gmm(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 50,
            tol: float = 1e-6, reg: float = COV_REG) -> GMMFit:
    """Batch EM with farthest-point initialisation.

    Covariances are loaded on the diagonal by ``reg`` times the average
    variance (at least 1), like the single-component fit.  Iteration stops
    when the log-likelihood changes by less than ``tol`` relative.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    centers = _farthest_point_init(X, k, rng)
    labels = np.argmin(((X[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
    resp = np.zeros((n, k))
    resp[np.arange(n), labels] = 1.0

    lls: list[float] = []
    for _ in range(max_iter):
        # M-step
        nk = resp.sum(axis=0) + 1e-12
        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        diff = X[None, :, :] - means[:, None, :]
        covs = np.einsum("nk,kni,knj->kij", resp, diff, diff) / nk[:, None, None]
        covs = _regularize_batch(0.5 * (covs + covs.transpose(0, 2, 1)), reg)
        # E-step
        log_r = _component_log_densities(X, means, covs) + np.log(weights)
        # row-wise logsumexp; scipy's generic version dominates runtime on tiny windows
        top = log_r.max(axis=1, keepdims=True)
        norm = (top + np.log(np.exp(log_r - top).sum(axis=1, keepdims=True)))[:, 0]
        resp = np.exp(log_r - norm[:, None])
        lls.append(float(norm.sum()))
        if len(lls) > 1 and abs(lls[-1] - lls[-2]) <= tol * max(1.0, abs(lls[-2])):
            break
    members = [GaussianMember(m, c) for m, c in zip(means, covs)]
    return GMMFit(weights, members, lls)


class MLDensity:
    def __init__(self, d: int):
        self.d = d
        self.acc = SufficientStatsAccumulator(stat_dim(d))
        self._member: GaussianMember | None = None

    def predict(self, x) -> float:
        if self._member is None:
            self._member = fit_moment_match(self.acc, self.d)
        return max(self._member.log_density(x), LOG_MIN_DENSITY)

    def learn(self, x) -> None:
        self.acc.accumulate(sufficient_stats(x))
        self._member = None

    def end_round(self, t: int) -> None:
        pass


class _WindowModel:
    def __init__(self, d: int):
        self.d = d
        self.history: deque = deque()
        self.t = 1

    def window(self, size: int) -> np.ndarray:
        items = list(self.history)[-size:]
        return np.array(items).reshape(-1, self.d)

    def learn(self, x) -> None:
        self.history.append(np.asarray(x, dtype=float))
        # nothing older than the largest window can ever be used again
        while len(self.history) > self._max_window(self.t + 1):
            self.history.popleft()

    def end_round(self, t: int) -> None:
        self.t = t + 1


class WindowKDEDensity(_WindowModel):
    def _max_window(self, t: int) -> int:
        return kde_window_size(t)

    def predict(self, x) -> float:
        win = self.window(kde_window_size(self.t))
        if len(win) == 0:
            return cold_start_member(self.d).log_density(x)
        return max(wkde_log_density(win, x), LOG_MIN_DENSITY)


class WindowGMMDensity(_WindowModel):
    def __init__(self, d: int, k: int = 3, seed: int = 0, max_iter: int = 50,
                 tol: float = 1e-6, reg: float = COV_REG):
        super().__init__(d)
        self.k = k
        self.rng = np.random.default_rng([seed, 0x6A4A])
        self.max_iter, self.tol, self.reg = max_iter, tol, reg

    def _max_window(self, t: int) -> int:
        return gmm_window_size(t, self.k)

    def predict(self, x) -> float:
        win = self.window(gmm_window_size(self.t, self.k))
        if len(win) < self.k:
            member = ml_estimate(win, self.d) if len(win) else cold_start_member(self.d)
            return max(member.log_density(x), LOG_MIN_DENSITY)
        fit = fit_gmm(win, self.k, self.rng, self.max_iter, self.tol, self.reg)
        return max(fit.log_density(x), LOG_MIN_DENSITY)
