"""Multinomial augmentation policy with normalized-sigmoid probabilities.

``p_k = sigmoid(theta_k) / sum_i sigmoid(theta_i)``. Unlike a softmax this is
not invariant to adding a constant to ``theta``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .augment import NUM_ELEMENTS, NUM_OPERATIONS, element_catalog, operation_from_index


@dataclass
class PolicyParams:
    theta: np.ndarray = field(default_factory=lambda: np.zeros(NUM_OPERATIONS))

    def __post_init__(self):
        self.theta = np.array(self.theta, dtype=np.float64)
        if self.theta.ndim != 1 or self.theta.size == 0:
            raise ValueError("theta must be a non-empty vector")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta has non-finite entries")

    @property
    def size(self) -> int:
        return self.theta.size

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.theta.copy())


@dataclass
class SampleCounts:
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @classmethod
    def zeros(cls, k: int = NUM_OPERATIONS) -> "SampleCounts":
        return cls(np.zeros(k, dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def add(self, ops) -> None:
        np.add.at(self.counts, np.asarray(ops, dtype=np.int64), 1)


def probabilities(p: PolicyParams) -> np.ndarray:
    s = expit(p.theta)
    return s / s.sum()


def sample_operations(p: PolicyParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` operation indices by inverse-CDF lookup."""
    cdf = np.cumsum(probabilities(p))
    u = rng.random(size) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), p.size - 1)


def sample_operation(p: PolicyParams, rng: np.random.Generator) -> int:
    return int(sample_operations(p, rng, 1)[0])


def log_prob_gradient(p: PolicyParams, c: SampleCounts) -> np.ndarray:
    """Gradient of ``sum_k c_k log p_k`` with respect to theta."""
    if c.counts.shape != p.theta.shape:
        raise ValueError("counts and theta differ in length")
    total = c.total
    if total == 0:
        raise ValueError("all-zero sample counts carry no gradient")
    s = expit(p.theta)
    ds = s * (1.0 - s)
    return c.counts * (1.0 - s) - total * ds / s.sum()


def marginal_first_element(p: PolicyParams) -> np.ndarray:
    """Row sums of the 36x36 operation-probability matrix (first element marginal)."""
    return probabilities(p).reshape(NUM_ELEMENTS, NUM_ELEMENTS).sum(axis=1)


def entropy(p: PolicyParams) -> float:
    q = probabilities(p)
    q = q[q > 0]
    return float(-(q * np.log(q)).sum())


# --------------------------------------------------------------------------
# snapshots
# --------------------------------------------------------------------------


def write_theta(path, p: PolicyParams, indices=None) -> None:
    """CSV snapshot ``operation,theta``; ``indices`` names the operation of each entry."""
    indices = np.arange(p.size) if indices is None else np.asarray(indices)
    if indices.shape != p.theta.shape:
        raise ValueError("one operation index per theta entry is required")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["operation", "theta"])
        for k, t in zip(indices, p.theta):
            w.writerow([int(k), repr(float(t))])


def read_snapshot(path) -> tuple[np.ndarray, PolicyParams]:
    """(operation indices, theta) from a snapshot written by ``write_theta``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["operation", "theta"]:
            raise ValueError("missing 'operation,theta' header")
        body = rows[1:]
        if any(len(r) != 2 for r in body):
            raise ValueError("every row needs exactly 2 fields")
        idx = np.array([int(r[0]) for r in body], dtype=np.int64)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= NUM_OPERATIONS or np.unique(idx).size != idx.size:
            raise ValueError(f"operation indices must be distinct and within [0, {NUM_OPERATIONS})")
        return idx, PolicyParams(np.array([float(r[1]) for r in body]))
    except (ValueError, IndexError) as exc:
        raise ValueError(f"malformed theta snapshot {path}: {exc}") from None


def read_theta(path) -> PolicyParams:
    return read_snapshot(path)[1]


def export_distribution(p: PolicyParams, prefix, indices=None) -> tuple[Path, Path]:
    """Write ``<prefix>.probs.csv`` (one row per operation) and ``<prefix>.marginal.csv``.

    The marginal is over the first element; operations outside ``indices``
    have probability zero.
    """
    indices = np.arange(p.size) if indices is None else np.asarray(indices)
    prefix = Path(prefix)
    probs_path = prefix.with_name(prefix.name + ".probs.csv")
    marg_path = prefix.with_name(prefix.name + ".marginal.csv")
    probs = probabilities(p)
    cat = element_catalog()
    with open(probs_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["operation", "first", "second", "probability"])
        for k, q in zip(indices, probs):
            op = operation_from_index(int(k), cat)
            w.writerow([int(k), op.first.name, op.second.name, repr(float(q))])
    full = np.zeros(NUM_OPERATIONS)
    full[indices] = probs
    with open(marg_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["element", "name", "probability"])
        for i, q in enumerate(full.reshape(NUM_ELEMENTS, NUM_ELEMENTS).sum(axis=1)):
            w.writerow([i, cat[i].name, repr(float(q))])
    return probs_path, marg_path


def read_probabilities(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["probability"]) for r in rows])
