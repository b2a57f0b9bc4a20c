"""Sequential detection loop.

Each round, in order:

1. score the incoming sample with the current density model,
2. declare a label by thresholding the score,
3. if the label is revealed, take a threshold step,
4. unless the sample was revealed anomalous, train the density model on it,
5. let the model grow (tree split rounds).

Density models implement ``predict(x) -> log p``, ``learn(x)`` and
``end_round(t)``.  ``learn`` always refers to the sample passed to the last
``predict`` call.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np
from scipy.special import logsumexp

from .exp_family import COV_REG, GaussianFamily
from .idt import IncrementalTree, TreeConfig
from .mixture import DEFAULT_THETA, LOG_MIN_DENSITY, eg_update_log, mixture_log_density
from .threshold import ANOMALY, CostPair, ThresholdState, decide, ogd_step, zero_one_loss


class StreamError(ValueError):
    """A record that cannot be processed; carries the 1-based round index."""

    def __init__(self, t: int, msg: str):
        super().__init__(f"round {t}: {msg}")
        self.t = t


@dataclass
class StreamRecord:
    x: np.ndarray
    true_label: int | None = None
    feedback: bool = False

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        if self.feedback and self.true_label is None:
            raise ValueError("feedback requires a true label")


@dataclass
class RoundOutput:
    t: int
    p_hat: float
    tau: float
    decision: int
    true_label: int | None = None
    log_loss: float | None = None
    zero_one: float | None = None
    log_p_hat: float = field(default=math.nan, repr=False)


class DensityModel(Protocol):
    def predict(self, x: np.ndarray) -> float: ...

    def learn(self, x: np.ndarray) -> None: ...

    def end_round(self, t: int) -> None: ...


class TreeMixtureDensity:
    """Tree of Gaussian node estimators mixed with exponentiated-gradient weights."""

    def __init__(self, d: int, tree_config: TreeConfig | None = None,
                 theta: float = DEFAULT_THETA, cov_reg: float = COV_REG):
        self.tree = IncrementalTree(d, tree_config, GaussianFamily(d, cov_reg))
        self.theta = theta
        self._cache: tuple[np.ndarray, np.ndarray, float] | None = None

    def log_density(self, x) -> np.ndarray | float:
        """Mixture log-density at ``x`` (single sample or batch), no side effects."""
        log_f = self.tree.node_log_densities(x)
        w = self.tree.weights()
        if log_f.ndim == 1:
            return mixture_log_density(w, log_f)
        keep = w > 0
        log_w = np.log(w[keep])[:, None]
        return np.maximum(logsumexp(log_f[keep] + log_w, axis=0), LOG_MIN_DENSITY)

    def predict(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        log_f = self.tree.node_log_densities(x)
        log_p = mixture_log_density(self.tree.weights(), log_f)
        self._cache = (x, log_f, log_p)
        return log_p

    def learn(self, x: np.ndarray) -> None:
        cached_x, log_f, log_p = self._cache
        if not np.array_equal(cached_x, x):
            raise RuntimeError("learn() must follow predict() on the same sample")
        self.tree.set_weights(eg_update_log(self.tree.weights(), log_f, log_p, self.theta))
        self.tree.observe(x)

    def end_round(self, t: int) -> None:
        self.tree.maybe_grow(t)
        self._cache = None

    @property
    def n_nodes(self) -> int:
        return len(self.tree)


@dataclass
class ThresholdConfig:
    costs: CostPair = field(default_factory=CostPair)
    lo: float = 0.0
    hi: float = 1.0
    log_space: bool = False


def score_of(log_p: float, log_space: bool) -> float:
    return log_p if log_space else math.exp(log_p)


def feedback_mask(n: int, prob: float, seed: int) -> np.ndarray:
    """Bernoulli(prob) reveal pattern; ``prob == 1`` reveals every round."""
    if prob >= 1.0:
        return np.ones(n, dtype=bool)
    rng = np.random.default_rng([seed, 0xFEED])
    return rng.random(n) < prob


def make_records(X: np.ndarray, labels: Sequence[int] | None, feedback_prob: float = 1.0,
                 seed: int = 0) -> list[StreamRecord]:
    X = np.asarray(X, dtype=float)
    if labels is None:
        return [StreamRecord(x) for x in X]
    mask = feedback_mask(len(X), feedback_prob, seed)
    return [StreamRecord(x, int(d), bool(f)) for x, d, f in zip(X, labels, mask)]


def run_detector(stream: Iterable[StreamRecord], model: DensityModel,
                 threshold: ThresholdConfig | None = None) -> list[RoundOutput]:
    """Run one detector over ``stream`` and return one output per round."""
    cfg = threshold or ThresholdConfig()
    state = ThresholdState.centered(cfg.lo, cfg.hi)
    out: list[RoundOutput] = []
    dim = None
    for t, rec in enumerate(stream, start=1):
        x = rec.x
        if dim is None:
            dim = x.shape
        if x.shape != dim:
            raise StreamError(t, f"sample shape {x.shape} differs from {dim}")
        if not np.all(np.isfinite(x)):
            raise StreamError(t, "non-finite sample")

        log_p = model.predict(x)
        score = score_of(log_p, cfg.log_space)
        tau = state.tau
        d_hat = decide(tau, score)
        d = rec.true_label
        out.append(RoundOutput(
            t=t, p_hat=math.exp(log_p), tau=tau, decision=d_hat, true_label=d,
            log_loss=None if d == ANOMALY else -log_p,
            zero_one=None if d is None else zero_one_loss(tau, score, d, cfg.costs),
            log_p_hat=log_p,
        ))
        if rec.feedback:
            state = ogd_step(state, score, d, cfg.costs)
        if not (rec.feedback and d == ANOMALY):
            model.learn(x)
        model.end_round(t)
    return out


def density_trace(stream: Sequence[StreamRecord], model: DensityModel) -> np.ndarray:
    """Log-density sequence the detector would report, without thresholding.

    Training depends only on the revealed labels, never on the threshold, so
    this trace is shared by every cost setting.
    """
    log_p = np.empty(len(stream))
    for t, rec in enumerate(stream, start=1):
        log_p[t - 1] = model.predict(rec.x)
        if not (rec.feedback and rec.true_label == ANOMALY):
            model.learn(rec.x)
        model.end_round(t)
    return log_p


CSV_COLUMNS = ("t", "p_hat", "tau", "decision", "true_label", "log_loss", "zero_one")


def write_outputs_csv(outputs: Sequence[RoundOutput], path: str | Path,
                      header: dict | None = None) -> None:
    """Write round outputs; ``header`` entries become leading ``# key=value`` lines."""
    with open(path, "w", newline="") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for o in outputs:
            w.writerow([o.t, repr(o.p_hat), repr(o.tau), o.decision,
                        "" if o.true_label is None else o.true_label,
                        "" if o.log_loss is None else repr(o.log_loss),
                        "" if o.zero_one is None else repr(o.zero_one)])


def read_outputs_csv(path: str | Path) -> list[RoundOutput]:
    def opt(s, conv):
        return None if s == "" else conv(s)

    with open(path) as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        return [RoundOutput(int(r["t"]), float(r["p_hat"]), float(r["tau"]),
                            int(r["decision"]), opt(r["true_label"], int),
                            opt(r["log_loss"], float), opt(r["zero_one"], float))
                for r in rows]
