"""Online maximum-likelihood estimation of a single exponential-family density.

The estimator only keeps the running mean of the sufficient statistics.
Fitting a member then amounts to moment matching: pick the member whose
expected sufficient statistic equals that running mean.

The shipped member is the multivariate Gaussian with full covariance, whose
sufficient statistic is ``[x; upper-triangle(x x^T)]``.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

LOG_2PI = float(np.log(2.0 * np.pi))

#: relative diagonal loading added to every fitted covariance
COV_REG = 1e-6


def _as_sample(x: ArrayLike) -> NDArray[np.float64]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite sample: {arr!r}")
    return arr


def stat_dim(d: int) -> int:
    """Length of the Gaussian sufficient-statistic vector in dimension ``d``."""
    return d + d * (d + 1) // 2


def sufficient_stats(x: ArrayLike) -> NDArray[np.float64]:
    """Gaussian sufficient statistics ``[x; upper-triangle(x x^T)]``.

    Accepts a single sample of shape ``(d,)`` or a batch ``(n, d)``.

    >>> sufficient_stats([1.0, 2.0])
    array([1., 2., 1., 2., 4.])
    """
    arr = _as_sample(x)
    iu = np.triu_indices(arr.shape[-1])
    outer = arr[..., :, None] * arr[..., None, :]
    return np.concatenate([arr, outer[..., iu[0], iu[1]]], axis=-1)


@dataclass
class SufficientStatsAccumulator:
    """Running mean of sufficient-statistic vectors.

    Parameters
    ----------
    dim : int
        Length of the statistic vector. Fixed for the lifetime of the object.
    """

    dim: int
    running_mean: NDArray[np.float64] = field(default=None)  # type: ignore[assignment]
    count: int = 0

    def __post_init__(self) -> None:
        if self.running_mean is None:
            self.running_mean = np.zeros(self.dim)
        else:
            self.running_mean = np.asarray(self.running_mean, dtype=float).copy()
            if self.running_mean.shape != (self.dim,):
                raise ValueError("running_mean does not match dim")
        if self.count < 0:
            raise ValueError("count must be non-negative")

    def accumulate(self, s: ArrayLike) -> "SufficientStatsAccumulator":
        s = np.asarray(s, dtype=float)
        if s.shape != (self.dim,):
            raise ValueError(f"statistic of shape {s.shape}, expected ({self.dim},)")
        t = self.count + 1
        self.running_mean = (self.running_mean * (t - 1) + s) / t
        self.count = t
        return self

    def copy(self) -> "SufficientStatsAccumulator":
        return SufficientStatsAccumulator(self.dim, self.running_mean.copy(), self.count)


def accumulate(acc: SufficientStatsAccumulator, s: ArrayLike) -> SufficientStatsAccumulator:
    """Return a new accumulator with ``s`` folded into the running mean."""
    return acc.copy().accumulate(s)


class GaussianMember:
    """Multivariate normal density stored in mean/covariance form.

    ``log_norm_const`` is ``-(d log 2pi + log det cov) / 2``; the Cholesky
    factor is cached so repeated evaluation is cheap.
    """

    __slots__ = ("mean", "covariance", "chol", "log_norm_const")

    def __init__(self, mean: ArrayLike, covariance: ArrayLike):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(covariance, dtype=float))
        d = self.mean.shape[0]
        if cov.shape != (d, d):
            raise ValueError("covariance shape does not match mean")
        self.covariance = 0.5 * (cov + cov.T)
        self.chol = np.linalg.cholesky(self.covariance)
        log_det = 2.0 * np.sum(np.log(np.diag(self.chol)))
        self.log_norm_const = -0.5 * (d * LOG_2PI + log_det)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def standard(cls, d: int) -> "GaussianMember":
        return cls(np.zeros(d), np.eye(d))

    def log_density(self, x: ArrayLike) -> NDArray[np.float64] | float:
        x = _as_sample(x)
        if x.shape[-1] != self.dim:
            raise ValueError(f"sample dimension {x.shape[-1]} != member dimension {self.dim}")
        diff = (x - self.mean).reshape(-1, self.dim).T
        z = np.linalg.solve(self.chol, diff) if self.dim > 1 else diff / self.chol[0, 0]
        out = self.log_norm_const - 0.5 * np.sum(z * z, axis=0)
        return float(out[0]) if x.ndim == 1 else out

    def density(self, x: ArrayLike):
        return np.exp(self.log_density(x))

    # natural-parameter view, used by point_loss
    def natural_params(self) -> NDArray[np.float64]:
        """Natural parameter aligned with :func:`sufficient_stats`."""
        precision = np.linalg.inv(self.covariance)
        eta1 = precision @ self.mean
        quad = -precision  # off-diagonal statistics appear once, so double them
        np.fill_diagonal(quad, -0.5 * np.diag(precision))
        iu = np.triu_indices(self.dim)
        return np.concatenate([eta1, quad[iu]])

    def log_partition(self) -> float:
        """``A(eta)`` with the constant base measure folded in."""
        quad = float(self.mean @ np.linalg.solve(self.covariance, self.mean))
        return 0.5 * quad - self.log_norm_const

    def __repr__(self) -> str:
        return f"GaussianMember(mean={self.mean!r}, covariance={self.covariance!r})"


def cold_start_member(d: int, mean: ArrayLike | None = None) -> GaussianMember:
    """Identity-covariance prior, centred at ``mean`` (origin by default)."""
    return GaussianMember(np.zeros(d) if mean is None else mean, np.eye(d))


def min_count(d: int) -> int:
    """Observations needed before a node leaves its cold-start prior."""
    return d + 2


def moments_from_stats(m: NDArray[np.float64], d: int) -> tuple[NDArray, NDArray]:
    """Split a Gaussian statistic mean into (mean, population covariance)."""
    mean = m[:d]
    second = np.empty((d, d))
    iu = np.triu_indices(d)
    second[iu] = m[d:]
    second.T[iu] = m[d:]
    cov = second - np.outer(mean, mean)
    return mean, 0.5 * (cov + cov.T)


def regularize_covariance(cov: NDArray[np.float64], reg: float = COV_REG) -> NDArray[np.float64]:
    """Clip negative eigenvalues to zero and load the diagonal by ``reg * scale``.

    ``scale`` is the average variance, but never below 1.
    """
    d = cov.shape[0]
    w, v = np.linalg.eigh(cov)
    if w[0] < 0.0:
        cov = (v * np.clip(w, 0.0, None)) @ v.T
    scale = max(float(np.trace(cov)) / d, 1.0)
    return cov + reg * scale * np.eye(d)


def fit_moment_match(acc: SufficientStatsAccumulator, d: int | None = None,
                     reg: float = COV_REG) -> GaussianMember:
    """Gaussian whose expected statistic equals ``acc.running_mean``.

    Before ``d + 2`` observations the identity-covariance prior is returned,
    centred at the origin when nothing has been seen and at the running
    sample mean otherwise.
    """
    if d is None:
        d = int(round((-3 + np.sqrt(9 + 8 * acc.dim)) / 2))
    if stat_dim(d) != acc.dim:
        raise ValueError("accumulator dimension is not a Gaussian statistic")
    if acc.count == 0:
        return cold_start_member(d)
    mean, cov = moments_from_stats(acc.running_mean, d)
    if acc.count < min_count(d):
        return cold_start_member(d, mean)
    return GaussianMember(mean, regularize_covariance(cov, reg))


def log_density(member: GaussianMember, x: ArrayLike):
    return member.log_density(x)


def point_loss(member: GaussianMember, x: ArrayLike):
    """Log-loss ``-<eta, s(x)> + A(eta)`` computed in natural parameters."""
    s = sufficient_stats(x)
    return -(s @ member.natural_params()) + member.log_partition()


class ExponentialFamily(ABC):
    """Minimal interface a family member must offer to be used in a tree node."""

    def __init__(self, d: int):
        self.d = d

    @property
    @abstractmethod
    def stat_dim(self) -> int: ...

    @abstractmethod
    def sufficient_stats(self, x: ArrayLike) -> NDArray[np.float64]: ...

    @abstractmethod
    def fit(self, acc: SufficientStatsAccumulator): ...

    @abstractmethod
    def log_density(self, member, x: ArrayLike): ...

    def accumulator(self) -> SufficientStatsAccumulator:
        return SufficientStatsAccumulator(self.stat_dim)


class GaussianFamily(ExponentialFamily):
    def __init__(self, d: int, reg: float = COV_REG):
        super().__init__(d)
        self.reg = reg

    @property
    def stat_dim(self) -> int:
        return stat_dim(self.d)

    def sufficient_stats(self, x):
        return sufficient_stats(x)

    def fit(self, acc):
        return fit_moment_match(acc, self.d, self.reg)

    def log_density(self, member, x):
        return member.log_density(x)
