"""Stream generators and the Vehicle Silhouettes loader.

Every stream labels a round anomalous (+1) with probability 0.1 and normal
(-1) otherwise.

``gauss``  normal samples from an equal-weight mixture of three 2-D Gaussians,
           anomalies from a tight Gaussian sitting between them.
``sine``   x1 ~ U(-1, 1); normal x2 in a band of height 0.2 above sin(pi x1),
           anomalous x2 in the same band above cos(pi x1).
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pipeline import StreamRecord, make_records
from .threshold import ANOMALY, NORMAL

ANOMALY_RATE = 0.1

GAUSS_MEANS = np.array([[-1.0, 1.0], [1.0, -1.0], [2.0, 2.0]])
GAUSS_COVS = np.array([
    [[0.2, 0.0], [0.0, 0.2]],
    [[0.14, 0.2], [0.2, 0.4]],
    [[0.4, -0.2], [-0.2, 0.14]],
])
ANOMALY_MEAN = np.array([1.0, 1.0])
ANOMALY_COV = 0.1 * np.eye(2)

SINE_BAND = 0.2

VEHICLE_CLASSES = ("opel", "saab", "bus", "van")
VEHICLE_FEATURES = 18
VEHICLE_ANOMALY_CLASS = "van"


class DataFormatError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass
class Dataset:
    X: np.ndarray
    labels: np.ndarray
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.X)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def records(self, feedback_prob: float = 1.0, seed: int = 0) -> list[StreamRecord]:
        return make_records(self.X, self.labels, feedback_prob, seed)


def sym_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix."""
    w, v = np.linalg.eigh(cov)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def _labels(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.where(rng.random(n) < ANOMALY_RATE, ANOMALY, NORMAL)


def gen_gauss_mixture_stream(seed: int, length: int = 1000) -> Dataset:
    if length < 1:
        raise ValueError("length must be positive")
    rng = np.random.default_rng(seed)
    labels = _labels(rng, length)
    comp = rng.integers(0, 3, size=length)
    z = rng.standard_normal((length, 2))
    roots = np.array([sym_sqrt(c) for c in GAUSS_COVS])
    X = GAUSS_MEANS[comp] + np.einsum("nij,nj->ni", roots[comp], z)
    anom = labels == ANOMALY
    X[anom] = ANOMALY_MEAN + z[anom] @ sym_sqrt(ANOMALY_COV).T
    return Dataset(X, labels, "gauss", {"seed": seed, "length": length})


def gen_sine_stream(seed: int, length: int = 1000) -> Dataset:
    if length < 1:
        raise ValueError("length must be positive")
    rng = np.random.default_rng(seed)
    labels = _labels(rng, length)
    x1 = rng.uniform(-1.0, 1.0, size=length)
    base = np.where(labels == ANOMALY, np.cos(np.pi * x1), np.sin(np.pi * x1))
    x2 = base + rng.uniform(0.0, SINE_BAND, size=length)
    return Dataset(np.column_stack([x1, x2]), labels, "sine", {"seed": seed, "length": length})


GENERATORS = {"gauss": gen_gauss_mixture_stream, "sine": gen_sine_stream}


def load_vehicle(path: str | Path) -> Dataset:
    """Read the Statlog vehicle layout: 18 numeric features then a class token.

    Whitespace- and comma-delimited files are both accepted; rows keep file
    order.  Label is +1 for vans, -1 for the other three classes.
    """
    rows, labels = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = [tok for tok in re.split(r"[,\s]+", line) if tok]
            if len(tokens) != VEHICLE_FEATURES + 1:
                raise DataFormatError(lineno, f"expected {VEHICLE_FEATURES + 1} columns, got {len(tokens)}")
            try:
                feats = [float(tok) for tok in tokens[:-1]]
            except ValueError as exc:
                raise DataFormatError(lineno, f"non-numeric feature ({exc})") from None
            cls = tokens[-1].lower()
            if cls not in VEHICLE_CLASSES:
                raise DataFormatError(lineno, f"unknown class {tokens[-1]!r}")
            rows.append(feats)
            labels.append(ANOMALY if cls == VEHICLE_ANOMALY_CLASS else NORMAL)
    X = np.array(rows, dtype=float).reshape(-1, VEHICLE_FEATURES)
    return Dataset(X, np.array(labels), "vehicle", {"path": str(path)})


def standardize_global(X: np.ndarray) -> np.ndarray:
    """Per-feature z-score with statistics of the whole (unlabelled) stream."""
    sd = X.std(axis=0)
    return (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def standardize_running(X: np.ndarray, labels: np.ndarray | None = None,
                        feedback: np.ndarray | None = None, warmup: int = 2) -> np.ndarray:
    """Per-feature z-score of each sample using only earlier presumed-normal samples.

    A sample counts as presumed normal unless its label was revealed
    anomalous.  Until ``warmup`` such samples exist the sample is only
    centred on the first one seen.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if labels is None:
        labels = np.full(n, NORMAL)
    if feedback is None:
        feedback = np.ones(n, dtype=bool)
    out = np.empty_like(X)
    count, mean, m2 = 0, np.zeros(d), np.zeros(d)
    for t in range(n):
        if count >= warmup:
            sd = np.sqrt(m2 / (count - 1))
            out[t] = (X[t] - mean) / np.where(sd > 0, sd, 1.0)
        else:
            out[t] = X[t] - (mean if count else X[t])
        if not (feedback[t] and labels[t] == ANOMALY):
            count += 1
            delta = X[t] - mean
            mean = mean + delta / count
            m2 = m2 + delta * (X[t] - mean)
    return out


def write_dataset_csv(ds: Dataset, path: str | Path, header: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh)
        w.writerow([f"x{j + 1}" for j in range(ds.dim)] + ["label"])
        for x, d in zip(ds.X, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [int(d)])


def read_dataset_csv(path: str | Path) -> Dataset:
    """Inverse of :func:`write_dataset_csv`."""
    rows, labels = [], []
    with open(path) as fh:
        lines = [(i, ln) for i, ln in enumerate(fh, start=1) if not ln.startswith("#")]
    if not lines:
        raise DataFormatError(1, "empty dataset file")
    header = next(csv.reader([lines[0][1]]))
    if not header or header[-1] != "label":
        raise DataFormatError(lines[0][0], "header must end with a 'label' column")
    width = len(header)
    for lineno, line in lines[1:]:
        if not line.strip():
            continue
        cells = next(csv.reader([line]))
        if len(cells) != width:
            raise DataFormatError(lineno, f"expected {width} columns, got {len(cells)}")
        try:
            rows.append([float(c) for c in cells[:-1]])
            lab = int(cells[-1])
        except ValueError as exc:
            raise DataFormatError(lineno, str(exc)) from None
        if lab not in (ANOMALY, NORMAL):
            raise DataFormatError(lineno, f"label must be +1 or -1, got {lab}")
        labels.append(lab)
    return Dataset(np.array(rows).reshape(-1, width - 1), np.array(labels), Path(path).stem)
