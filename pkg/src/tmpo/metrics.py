"""Diversity and coverage metrics over sample sets.

The pairwise-distance statistic uses dimension-normalized Euclidean distances
so a pair exactly sqrt(D) apart contributes zero; its geometric mean is
dominated by the closest pairs, which is what makes negative values a
near-duplicate alarm. Exact duplicates are floored at 1e-12 before the log to
keep the statistic finite while still strongly negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mixture import MixtureSpec

__all__ = ["SampleSet", "lgmd", "cosine_diversity", "mode_occupancy", "ModeOccupancy"]

_DIST_FLOOR = 1e-12


@dataclass(frozen=True)
class SampleSet:
    """N feature vectors of dimension D (raw 2-D coordinates in the toy)."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", s)
        if s.ndim != 2 or s.shape[0] < 2:
            raise ValueError("need an (N, D) array with N >= 2")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def _pairwise_distances(x: np.ndarray) -> np.ndarray:
    """Condensed upper-triangle Euclidean distances in fixed (i < j) order."""
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    iu = np.triu_indices(x.shape[0], k=1)
    return np.sqrt(np.maximum(d2[iu], 0.0))


def lgmd(s: SampleSet) -> float:
    """Log geometric mean of dimension-normalized pairwise distances."""
    d = np.maximum(_pairwise_distances(s.samples), _DIST_FLOOR)
    return float(np.mean(np.log(d / math.sqrt(s.dim))))


def cosine_diversity(s: SampleSet, embed: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
    """Mean pairwise cosine distance after an optional embedding map.

    The default embedding is the identity on raw coordinates.
    """
    feats = s.samples if embed is None else np.asarray(embed(s.samples), dtype=np.float64)
    norms = np.linalg.norm(feats, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("undefined cosine")
    unit = feats / norms[:, None]
    cos = np.clip(unit @ unit.T, -1.0, 1.0)
    iu = np.triu_indices(feats.shape[0], k=1)
    return float(np.mean(1.0 - cos[iu]))


@dataclass(frozen=True)
class ModeOccupancy:
    fractions: np.ndarray   # per component, sums to 1
    counts: np.ndarray
    max_fraction: float     # collapse indicator


def mode_occupancy(spec: MixtureSpec, s: SampleSet) -> ModeOccupancy:
    """Assign each sample to the nearest component mean and report fractions."""
    if s.dim != 2:
        raise ValueError("mode occupancy is defined on raw 2-D samples")
    means = spec.means()
    d2 = np.sum((s.samples[:, None, :] - means[None, :, :]) ** 2, axis=2)
    nearest = np.argmin(d2, axis=1)
    counts = np.bincount(nearest, minlength=spec.n_components)
    fractions = counts / s.n
    return ModeOccupancy(fractions=fractions, counts=counts,
                         max_fraction=float(fractions.max()))
