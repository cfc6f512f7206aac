"""The 2-D toy environment: a Gaussian mixture with rewarded, non-rewarded and
rare modes, plus the smooth scalar reward over terminal samples.

The reward is a sum of unnormalized Gaussian bumps anchored at the rewarded
component means on top of a constant background. Smoothness matters: the
finite-difference gradient checks run straight through it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MixtureComponent",
    "MixtureSpec",
    "RewardReport",
    "ring_mixture",
    "sample_data",
    "reward",
    "reward_many",
    "group_zscore",
]

_ZSCORE_EPS = 1e-8


@dataclass(frozen=True)
class MixtureComponent:
    mean: np.ndarray          # (2,)
    cov: np.ndarray           # (2, 2) SPD
    weight: float
    reward_value: float


@dataclass(frozen=True)
class MixtureSpec:
    components: tuple[MixtureComponent, ...]
    background_reward: float = 0.0

    def __post_init__(self):
        comps = []
        for c in self.components:
            mean = np.asarray(c.mean, dtype=np.float64).reshape(2)
            cov = np.asarray(c.cov, dtype=np.float64).reshape(2, 2)
            if not np.allclose(cov, cov.T):
                raise ValueError("covariance must be symmetric")
            np.linalg.cholesky(cov)  # raises LinAlgError unless SPD
            if c.weight <= 0.0:
                raise ValueError("component weights must be positive")
            if c.reward_value < 0.0:
                raise ValueError("reward values must be non-negative")
            comps.append(MixtureComponent(mean, cov, float(c.weight), float(c.reward_value)))
        object.__setattr__(self, "components", tuple(comps))
        w = sum(c.weight for c in self.components)
        if abs(w - 1.0) > 1e-9:
            raise ValueError(f"component weights sum to {w}, not 1")
        if self.background_reward < 0.0:
            raise ValueError("background reward must be non-negative")
        # Single-component specs are allowed as degenerate diagnostics (e.g.
        # pretraining smoke tests); the rewarded/non-reward split only makes
        # sense once there is more than one mode.
        rvals = [c.reward_value for c in self.components]
        if len(rvals) >= 2:
            if not any(r > self.background_reward for r in rvals):
                raise ValueError("need at least one rewarded mode above background")
            if not any(r == self.background_reward for r in rvals):
                raise ValueError("need at least one non-reward mode at background level")

    @property
    def n_components(self) -> int:
        return len(self.components)

    def means(self) -> np.ndarray:
        return np.stack([c.mean for c in self.components])

    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def reward_values(self) -> np.ndarray:
        return np.array([c.reward_value for c in self.components])

    def rewarded_indices(self) -> list[int]:
        return [i for i, c in enumerate(self.components)
                if c.reward_value > self.background_reward]


@dataclass(frozen=True)
class RewardReport:
    """Raw rewards of one group alongside their within-group z-scores."""

    raw: np.ndarray
    zscored: np.ndarray
    degenerate: bool  # true when the raw spread was below the epsilon guard


def ring_mixture(
    n_components: int = 5,
    radius: float = 4.0,
    cov_scale: float = 0.15,
    weights: tuple[float, ...] = (0.24, 0.24, 0.24, 0.04, 0.24),
    reward_values: tuple[float, ...] = (1.0, 1.0, 1.0, 0.5, 0.05),
    background_reward: float = 0.05,
) -> MixtureSpec:
    """Default preset: components equally spaced on a circle.

    Component 3 is the rare-density rewarded mode (weight 0.04, reward 0.5)
    and component 4 sits at the background reward level.
    """
    if len(weights) != n_components or len(reward_values) != n_components:
        raise ValueError("weights and reward_values must match n_components")
    comps = []
    for i in range(n_components):
        angle = 2.0 * np.pi * i / n_components
        mean = radius * np.array([np.cos(angle), np.sin(angle)])
        comps.append(MixtureComponent(mean, cov_scale * np.eye(2),
                                      weights[i], reward_values[i]))
    return MixtureSpec(tuple(comps), background_reward)


def sample_data(spec: MixtureSpec, n: int, seed) -> np.ndarray:
    """n i.i.d. draws from the mixture, deterministic given the seed.

    ``seed`` may be an int or an existing numpy Generator.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = rng.choice(spec.n_components, size=n, p=spec.weights())
    out = np.empty((n, 2))
    eps = rng.standard_normal((n, 2))
    for i, c in enumerate(spec.components):
        sel = idx == i
        if not np.any(sel):
            continue
        chol = np.linalg.cholesky(c.cov)
        out[sel] = c.mean + eps[sel] @ chol.T
    return out


def reward(spec: MixtureSpec, x: np.ndarray) -> float:
    """Smooth reward at a single point: background plus Gaussian bumps that
    peak at reward_value on each component mean."""
    x = np.asarray(x, dtype=np.float64).reshape(2)
    if not np.all(np.isfinite(x)):
        raise ValueError("reward requires a finite input point")
    return float(reward_many(spec, x[None, :])[0])


def reward_many(spec: MixtureSpec, xs: np.ndarray) -> np.ndarray:
    """Vectorized reward over an (n, 2) array of points."""
    xs = np.asarray(xs, dtype=np.float64)
    total = np.full(xs.shape[0], spec.background_reward)
    for c in spec.components:
        d = xs - c.mean
        cov_inv = np.linalg.inv(c.cov)
        quad = np.einsum("ni,ij,nj->n", d, cov_inv, d)
        total += (c.reward_value - spec.background_reward) * np.exp(-0.5 * quad)
    return total


def group_zscore(raw: np.ndarray) -> RewardReport:
    """Within-group z-scores using the population standard deviation.

    Groups with spread at or below 1e-8 come back as all zeros rather than
    amplified noise.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1 or raw.shape[0] < 2:
        raise ValueError("group_zscore needs a 1-D vector with K >= 2 entries")
    mu = raw.mean()
    sigma = raw.std()  # population convention, ddof=0
    if sigma <= _ZSCORE_EPS:
        return RewardReport(raw, np.zeros_like(raw), True)
    return RewardReport(raw, (raw - mu) / (sigma + _ZSCORE_EPS), False)
