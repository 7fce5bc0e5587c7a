"""Score-function gradient of validation accuracy and the Adam ascent step on theta."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .policy import PolicyParams, SampleCounts, log_prob_gradient


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.05
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, k: int, **kw) -> "AdamState":
        return cls(np.zeros(k), np.zeros(k), **kw)

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.t, self.lr, self.beta1, self.beta2, self.eps)


def reinforce_gradient(
    p: PolicyParams,
    counts_per_traj,
    accs,
    baseline: bool = True,
) -> np.ndarray:
    """Average over trajectories of ``acc_n * grad log p(trajectory_n)``.

    With ``baseline`` the accuracies are shifted to zero mean first, so a
    single trajectory always yields the zero vector. ``baseline=False`` uses
    the raw accuracies.
    """
    accs = np.asarray(accs, dtype=np.float64)
    if len(counts_per_traj) != accs.size:
        raise ValueError(f"{len(counts_per_traj)} count vectors but {accs.size} accuracies")
    if accs.size == 0:
        raise ValueError("need at least one trajectory")
    weights = accs - accs.mean() if baseline else accs
    grad = np.zeros(p.size)
    for w, c in zip(weights, counts_per_traj):
        if w != 0.0:
            grad += w * log_prob_gradient(p, c)
    return grad / accs.size


def adam_ascent_step(p: PolicyParams, grad: np.ndarray, s: AdamState) -> tuple[PolicyParams, AdamState]:
    """One bias-corrected Adam step in the direction of ``+grad``."""
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise ValueError("policy gradient has non-finite entries")
    t = s.t + 1
    m = s.beta1 * s.m + (1.0 - s.beta1) * grad
    v = s.beta2 * s.v + (1.0 - s.beta2) * grad * grad
    m_hat = m / (1.0 - s.beta1**t)
    v_hat = v / (1.0 - s.beta2**t)
    theta = p.theta + s.lr * m_hat / (np.sqrt(v_hat) + s.eps)
    return PolicyParams(theta), AdamState(m, v, t, s.lr, s.beta1, s.beta2, s.eps)


def adam_step_bound(s: AdamState) -> float:
    """Largest possible |theta change| at step ``s.t`` for any gradient history.

    By Cauchy-Schwarz ``|m_t| <= (1-b1)/sqrt(1-b2) * sqrt(sum_j (b1^2/b2)^j) * sqrt(v_t)``;
    the bias corrections then scale it. Exceeds ``lr`` whenever ``(1-b1)^2 > 1-b2``.
    """
    t = max(s.t, 1)
    r = s.beta1**2 / s.beta2
    geo = np.sum(r ** np.arange(t))
    ratio = (1.0 - s.beta1) / np.sqrt(1.0 - s.beta2) * np.sqrt(geo)
    return float(s.lr * ratio * np.sqrt(1.0 - s.beta2**t) / (1.0 - s.beta1**t))
