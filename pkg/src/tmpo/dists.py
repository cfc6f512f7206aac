"""Exact probability primitives over finite K-atom groups.

Natural log throughout (KL values are in nats). A dropped atom (q_i > 0 while
p_i = 0) makes the forward KL return ``math.inf`` as an explicit sentinel:
this is a deliberate "mode dropped" signal, not an overflow, and callers must
branch on it before anything reaches a gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FiniteDist",
    "RewardVec",
    "boltzmann_target",
    "forward_kl",
    "total_variation",
    "entropy",
    "reverse_kl_identity_check",
    "log_softmax",
]

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class FiniteDist:
    """Probability distribution over K >= 2 atoms."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or p.shape[0] < 2:
            raise ValueError("FiniteDist needs a 1-D vector with K >= 2 entries")
        if not np.all(np.isfinite(p)):
            raise ValueError("FiniteDist entries must be finite")
        if np.any(p < 0.0):
            raise ValueError("FiniteDist entries must be non-negative")
        if abs(float(p.sum()) - 1.0) > _SUM_TOL:
            raise ValueError(f"FiniteDist entries sum to {p.sum()!r}, not 1")

    @property
    def k(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class RewardVec:
    """K rewards plus the inverse temperature of the exponential target.

    beta = 0 flattens the target to uniform and is only meaningful as a
    diagnostic, so it must be opted into explicitly.
    """

    rewards: np.ndarray
    beta: float
    diagnostic: bool = field(default=False)

    def __post_init__(self):
        r = np.asarray(self.rewards, dtype=np.float64)
        object.__setattr__(self, "rewards", r)
        if r.ndim != 1 or r.shape[0] < 2:
            raise ValueError("RewardVec needs a 1-D vector with K >= 2 entries")
        if not np.all(np.isfinite(r)):
            raise ValueError("invalid reward")
        if not math.isfinite(self.beta):
            raise ValueError("beta must be finite")
        if self.beta < 0.0:
            raise ValueError("beta must be positive")
        if self.beta == 0.0 and not self.diagnostic:
            raise ValueError("beta = 0 requires diagnostic=True")

    @property
    def k(self) -> int:
        return self.rewards.shape[0]


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Shift-stable log-softmax. Max-subtraction is exact: softmax is invariant
    to adding a constant, so subtracting the max changes no output value."""
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max()
    return shifted - math.log(np.exp(shifted).sum())


def boltzmann_target(r: RewardVec) -> FiniteDist:
    """Exponential-reward target q_i = exp(beta r_i) / sum_j exp(beta r_j)."""
    logq = log_softmax(r.beta * r.rewards)
    return FiniteDist(np.exp(logq) / np.exp(logq).sum())


def forward_kl(q: FiniteDist, p: FiniteDist) -> float:
    """KL(q || p) in nats, with 0 log(0/p) = 0.

    Returns math.inf when q puts mass on an atom where p has none.
    """
    if q.k != p.k:
        raise ValueError("distributions must have the same length")
    qa, pa = q.probs, p.probs
    mask = qa > 0.0
    if np.any(pa[mask] == 0.0):
        return math.inf
    return float(np.sum(qa[mask] * (np.log(qa[mask]) - np.log(pa[mask]))))


def total_variation(q: FiniteDist, p: FiniteDist) -> float:
    """Total variation distance, 0.5 * sum |q_i - p_i|, in [0, 1]."""
    if q.k != p.k:
        raise ValueError("distributions must have the same length")
    return float(0.5 * np.abs(q.probs - p.probs).sum())


def entropy(p: FiniteDist) -> float:
    """Shannon entropy in nats, with 0 log 0 = 0."""
    pa = p.probs
    mask = pa > 0.0
    return float(-np.sum(pa[mask] * np.log(pa[mask])))


def reverse_kl_identity_check(p: FiniteDist, r: RewardVec) -> tuple[float, float, float]:
    """Check E_p[beta R] == -KL(p||q) - H(p) + log sum exp(beta R) term by term.

    Returns (lhs, rhs, gap). The identity is algebraic, so the gap is pure
    rounding and should sit far below 1e-10.
    """
    if p.k != r.k:
        raise ValueError("distribution and rewards must have the same length")
    br = r.beta * r.rewards
    lhs = float(np.dot(p.probs, br))
    q = boltzmann_target(r)
    m = float(br.max())
    log_z = m + math.log(np.exp(br - m).sum())
    rhs = -forward_kl(p, q) - entropy(p) + log_z
    return lhs, rhs, abs(lhs - rhs)
