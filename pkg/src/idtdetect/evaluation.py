"""Metrics and experiment harness.

ROC points come from sweeping the false-alarm cost over ``{i/100}`` with the
miss cost fixed at 1; one detector run per cost.  Because density training
never depends on the threshold, the density trace of a dataset is computed
once and every cost point re-thresholds that trace.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from .baselines import MLDensity, WindowGMMDensity, WindowKDEDensity
from .data import Dataset, standardize_global, standardize_running
from .idt import TreeConfig
from .mixture import (
    DEFAULT_THETA,
    EGTuning,
    eg_update,
    mixture_density,
    regret_bound,
    theoretical_theta,
)
from .pipeline import (
    RoundOutput,
    ThresholdConfig,
    TreeMixtureDensity,
    density_trace,
    feedback_mask,
    run_detector,
    score_of,
)
from .threshold import ANOMALY, CostPair, ThresholdBank, ThresholdState, logistic_loss, ogd_step

ALGORITHMS = ("itan", "wgmm", "wkde", "ml")
COST_GRID = np.arange(100) / 100.0


@dataclass
class RunConfig:
    """Everything needed to replay one detector run."""

    algo: str = "itan"
    beta: float = 2.0
    xi: float = 0.8
    reset_two_means: bool = False
    split_leaves_only: bool = True
    seed_child_centroids: bool = True
    theta: float = DEFAULT_THETA
    cov_reg: float = 1e-2
    gmm_k: int = 3
    gmm_reg: float = 0.3
    c1: float = 1.0
    c_1: float = 1.0
    feedback_prob: float = 1.0
    seed: int = 0
    log_space_threshold: bool = False
    g_lo: float | None = None
    g_hi: float | None = None
    standardize: str = "none"

    def __post_init__(self) -> None:
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}; choose from {ALGORITHMS}")
        if self.standardize not in ("none", "running", "global"):
            raise ValueError(f"unknown standardization {self.standardize!r}")

    def feasible_set(self) -> tuple[float, float]:
        if self.log_space_threshold:
            lo = -10.0 if self.g_lo is None else self.g_lo
            hi = 0.0 if self.g_hi is None else self.g_hi
        else:
            lo = 0.0 if self.g_lo is None else self.g_lo
            hi = 1.0 if self.g_hi is None else self.g_hi
        return lo, hi

    def threshold_config(self) -> ThresholdConfig:
        lo, hi = self.feasible_set()
        return ThresholdConfig(CostPair(self.c1, self.c_1), lo, hi, self.log_space_threshold)

    def as_dict(self) -> dict:
        return asdict(self)


def experiment_defaults(exp: str) -> dict:
    """RunConfig overrides used for a named experiment (empty for unknown names).

    The vehicle features have very different scales and 18 dimensions, so
    samples are z-scored with running statistics of presumed-normal data and
    the threshold works on log-densities.
    """
    if exp == "vehicle":
        return {"standardize": "running", "log_space_threshold": True}
    return {}


def tree_config(cfg: RunConfig) -> TreeConfig:
    return TreeConfig(cfg.beta, cfg.xi, cfg.reset_two_means,
                      cfg.split_leaves_only, cfg.seed_child_centroids)


def build_model(cfg: RunConfig, d: int):
    if cfg.algo == "itan":
        return TreeMixtureDensity(d, tree_config(cfg), cfg.theta, cfg.cov_reg)
    if cfg.algo == "wgmm":
        return WindowGMMDensity(d, cfg.gmm_k, cfg.seed, reg=cfg.gmm_reg)
    if cfg.algo == "wkde":
        return WindowKDEDensity(d)
    return MLDensity(d)


def prepared_X(ds: Dataset, cfg: RunConfig) -> np.ndarray:
    if cfg.standardize == "global":
        return standardize_global(ds.X)
    if cfg.standardize == "running":
        fb = feedback_mask(len(ds), cfg.feedback_prob, cfg.seed)
        return standardize_running(ds.X, ds.labels, fb)
    return ds.X


def run_once(ds: Dataset, cfg: RunConfig) -> tuple[list[RoundOutput], object]:
    """Run one full detector; returns the outputs and the trained model."""
    X = prepared_X(ds, cfg)
    stream = Dataset(X, ds.labels).records(cfg.feedback_prob, cfg.seed)
    model = build_model(cfg, ds.dim)
    return run_detector(stream, model, cfg.threshold_config()), model


# metrics

def avg_log_loss_curve(outputs: Sequence[RoundOutput]) -> np.ndarray:
    """Running mean of the log-loss with anomalous rounds counted as 0."""
    losses = np.array([0.0 if o.log_loss is None else o.log_loss for o in outputs])
    return np.cumsum(losses) / np.arange(1, len(losses) + 1)


def roc_point(decisions: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """(FPR, TPR); TPR is NaN when the stream has no anomalies."""
    decisions = np.asarray(decisions)
    labels = np.asarray(labels)
    pos = labels == ANOMALY
    flagged = decisions == ANOMALY
    tpr = float(flagged[pos].mean()) if pos.any() else math.nan
    fpr = float(flagged[~pos].mean()) if (~pos).any() else math.nan
    return fpr, tpr


def auc(points) -> float:
    """Trapezoidal area under (FPR, TPR) points with (0,0) and (1,1) added.

    Duplicates and input order do not matter.  Points sharing an FPR are
    joined by a vertical segment (lowest TPR first).
    """
    pts = {(float(f), float(t)) for f, t in points
           if not (math.isnan(f) or math.isnan(t))}
    pts |= {(0.0, 0.0), (1.0, 1.0)}
    arr = np.array(sorted(pts))
    return float(trapezoid(arr[:, 1], arr[:, 0]))


@dataclass
class SweepResult:
    costs: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    log_p: np.ndarray
    seconds: float
    meta: dict = field(default_factory=dict)

    @property
    def auc(self) -> float:
        return auc(zip(self.fpr, self.tpr))

    def sorted_points(self) -> list[tuple[float, float, float]]:
        order = np.lexsort((self.tpr, self.fpr))
        return [(float(self.costs[i]), float(self.fpr[i]), float(self.tpr[i])) for i in order]


def sweep_scores(scores: np.ndarray, labels: np.ndarray, feedback: np.ndarray,
                 costs: np.ndarray, c_miss: float, lo: float, hi: float) -> np.ndarray:
    """Decisions of one threshold per cost run over a fixed score trace.

    Returns an array of shape ``(len(costs), len(scores))``.
    """
    bank = ThresholdBank(costs, c_miss, lo, hi)
    out = np.empty((len(costs), len(scores)), dtype=int)
    for t, (s, d, f) in enumerate(zip(scores, labels, feedback)):
        out[:, t] = bank.decide(s)
        bank.update(s, int(d) if f else None)
    return out


def roc_sweep(ds: Dataset, cfg: RunConfig, costs: np.ndarray = COST_GRID) -> SweepResult:
    """ROC over the false-alarm cost grid (miss cost ``cfg.c1``)."""
    start = time.perf_counter()
    X = prepared_X(ds, cfg)
    stream = Dataset(X, ds.labels).records(cfg.feedback_prob, cfg.seed)
    log_p = density_trace(stream, build_model(cfg, ds.dim))
    elapsed = time.perf_counter() - start
    scores = log_p if cfg.log_space_threshold else np.exp(log_p)
    fb = np.array([r.feedback for r in stream])
    lo, hi = cfg.feasible_set()
    dec = sweep_scores(scores, ds.labels, fb, costs, cfg.c1, lo, hi)
    pts = np.array([roc_point(row, ds.labels) for row in dec])
    return SweepResult(np.asarray(costs), pts[:, 0], pts[:, 1], log_p, elapsed,
                       {"config": cfg.as_dict()})


def roc_sweep_reference(ds: Dataset, cfg: RunConfig, costs: np.ndarray = COST_GRID):
    """Same sweep with an independent full detector run per cost point."""
    pts = []
    for c in costs:
        run_cfg = RunConfig(**{**cfg.as_dict(), "c_1": float(c)})
        outputs, _ = run_once(ds, run_cfg)
        pts.append(roc_point([o.decision for o in outputs], ds.labels))
    return np.array(pts)


def final_log_loss(log_p: np.ndarray, labels: np.ndarray) -> float:
    """``Loss(T)``: mean over all rounds of -log p, anomalous rounds as 0."""
    return float(np.where(labels == ANOMALY, 0.0, -log_p).mean())


def log_loss_curve_from_trace(log_p: np.ndarray, labels: np.ndarray) -> np.ndarray:
    losses = np.where(labels == ANOMALY, 0.0, -log_p)
    return np.cumsum(losses) / np.arange(1, len(losses) + 1)


# regret probes

def two_expert_stream(T: int = 1000, seed: int = 7):
    """Fixed 1-D stream scored by two Gaussian experts N(-1, 1) and N(2, 1).

    Samples come from 0.7 N(-1, 1) + 0.3 N(2, 1); returns the (T, 2) matrix of
    expert densities at the samples.
    """
    rng = np.random.default_rng(seed)
    comp = rng.random(T) < 0.3
    x = np.where(comp, 2.0, -1.0) + rng.standard_normal(T)
    means = np.array([-1.0, 2.0])
    return np.exp(-0.5 * (x[:, None] - means) ** 2) / math.sqrt(2 * math.pi)


def eg_regret_probe(f: np.ndarray | None = None, grid_step: float = 0.01) -> dict:
    """EG mixture log-loss minus the best fixed two-expert combination.

    The comparator is found by brute force on a simplex grid; A and R are
    measured from the stream.
    """
    if f is None:
        f = two_expert_stream()
    T, n = f.shape
    grid = np.linspace(0.0, 1.0, int(round(1 / grid_step)) + 1)
    fixed = np.array([-np.log(a * f[:, 0] + (1 - a) * f[:, 1]).sum() for a in grid])
    best = float(fixed.min())
    tuning = EGTuning(loss_bound_A=best / T, density_bound_R=float(f.max()), horizon_T=T)
    theta = theoretical_theta(tuning, n)
    w = np.full(n, 1.0 / n)
    total = 0.0
    for ft in f:
        p = mixture_density(w, ft)
        total -= math.log(p)
        w = eg_update(w, ft, p, theta)
    return {"eg_loss": total, "best_fixed_loss": best,
            "best_alpha": float(grid[int(np.argmin(fixed))]), "regret": total - best,
            "bound": regret_bound(tuning, n), "theta": theta,
            "A": tuning.loss_bound_A, "R": tuning.density_bound_R, "T": T}


def threshold_feedback_stream(T: int = 1000, seed: int = 11):
    """Fixed (score, label) stream in [0, 1]: anomalies score low.

    The anomaly rate of 0.3 puts the best fixed threshold inside [0, 1] for
    the probe's cost pair, so the comparator is not a boundary point.
    """
    rng = np.random.default_rng(seed)
    d = np.where(rng.random(T) < 0.3, ANOMALY, -1)
    p = np.clip(np.where(d == ANOMALY, rng.normal(0.25, 0.15, T), rng.normal(0.6, 0.15, T)), 0, 1)
    return p, d


def ogd_regret_probe(p: np.ndarray | None = None, d: np.ndarray | None = None,
                     costs: CostPair = CostPair(1.0, 0.5), grid_points: int = 10_000) -> dict:
    """Logistic-loss regret of the adaptive threshold against a grid oracle on G=[0, 1]."""
    if p is None:
        p, d = threshold_feedback_stream()
    state = ThresholdState.centered(0.0, 1.0)
    total = 0.0
    for pt, dt in zip(p, d):
        total += logistic_loss(state.tau, pt, int(dt), costs)
        state = ogd_step(state, pt, int(dt), costs)
    grid = np.linspace(0.0, 1.0, grid_points)
    c = np.where(d == ANOMALY, costs.miss, costs.false_alarm)
    fixed = (c[None, :] * np.logaddexp(0.0, (p[None, :] - grid[:, None]) * d[None, :])).sum(axis=1)
    best = float(fixed.min())
    T = len(p)
    D = 1.0
    bound = math.exp(D) * costs.c_max ** 2 / (2 * costs.c_min) * (1 + math.log(T))
    return {"ogd_loss": total, "best_fixed_loss": best,
            "best_tau": float(grid[int(np.argmin(fixed))]), "regret": total - best,
            "bound": bound, "T": T}


# experiment driver

def score_of_trace(log_p: np.ndarray, log_space: bool) -> np.ndarray:
    return np.array([score_of(v, log_space) for v in log_p])


def evaluate(datasets: Sequence[Dataset], cfg: RunConfig,
             costs: np.ndarray = COST_GRID) -> dict:
    """ROC/AUC and log-loss for one algorithm over several datasets."""
    sweeps = [roc_sweep(ds, RunConfig(**{**cfg.as_dict(), "seed": ds.meta.get("seed", cfg.seed)}), costs)
              for ds in datasets]
    aucs = np.array([s.auc for s in sweeps])
    losses = np.array([final_log_loss(s.log_p, ds.labels) for s, ds in zip(sweeps, datasets)])
    curves = np.array([log_loss_curve_from_trace(s.log_p, ds.labels) for s, ds in zip(sweeps, datasets)])
    secs = np.array([s.seconds for s in sweeps])
    mean_fpr = np.mean([s.fpr for s in sweeps], axis=0)
    mean_tpr = np.nanmean([s.tpr for s in sweeps], axis=0)
    return {
        "algo": cfg.algo,
        "auc_mean": float(aucs.mean()), "auc_std": float(aucs.std()),
        "aucs": aucs.tolist(),
        "log_loss_mean": float(losses.mean()), "log_losses": losses.tolist(),
        "seconds_mean": float(secs.mean()), "seconds_std": float(secs.std()),
        "roc": list(zip(costs.tolist(), mean_fpr.tolist(), mean_tpr.tolist())),
        "loss_curve": curves.mean(axis=0).tolist(),
        "config": cfg.as_dict(),
    }
