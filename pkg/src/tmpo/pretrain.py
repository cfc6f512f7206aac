"""Rectified-flow pretraining: regress the velocity field onto the linear
interpolant's velocity so the model covers every mixture mode before any
post-training touches it.

Each step draws x0 from the data mixture, x1 from a standard normal and
t ~ U[0,1], forms x_t = (1-t) x0 + t x1 and minimizes the mean squared error
between v(x_t, t) and x1 - x0 with Adam.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mixture import MixtureSpec, sample_data
from .net import GradBuffer, PolicyParams, init_params, velocity_batch, velocity_backward_batch
from .optim import Adam

__all__ = ["PretrainConfig", "pretrain_rectified_flow", "flow_matching_loss"]


@dataclass(frozen=True)
class PretrainConfig:
    steps: int = 4000
    batch_size: int = 256
    lr: float = 2e-3
    hidden: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("steps and batch_size must be >= 1")
        if self.lr <= 0.0:
            raise ValueError("learning rate must be positive")


def flow_matching_loss(params: PolicyParams, x0: np.ndarray, x1: np.ndarray,
                       t: np.ndarray, grads: GradBuffer | None = None) -> float:
    """Mean over the batch of |v(x_t, t) - (x1 - x0)|^2; optionally
    accumulates the exact gradient."""
    xt = (1.0 - t)[:, None] * x0 + t[:, None] * x1
    target = x1 - x0
    v = velocity_batch(params, xt, t)
    resid = v - target
    loss = float(np.mean(np.sum(resid * resid, axis=1)))
    if grads is not None:
        upstream = 2.0 * resid / x0.shape[0]
        velocity_backward_batch(params, xt, t, upstream, grads)
    return loss


def pretrain_rectified_flow(spec: MixtureSpec, config: PretrainConfig,
                            loss_log: list | None = None) -> PolicyParams:
    """Train a fresh velocity field on the mixture; deterministic in the seed.

    Raises FloatingPointError with the offending step index if the loss
    stops being finite.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed,
                                                       spawn_key=(0xF10,)))
    params = init_params(config.hidden, seed=config.seed)
    grads = GradBuffer(config.hidden)
    opt = Adam(params, lr=config.lr)
    for step in range(config.steps):
        x0 = sample_data(spec, config.batch_size, rng)
        x1 = rng.standard_normal((config.batch_size, 2))
        t = rng.uniform(0.0, 1.0, config.batch_size)
        grads.zero()
        loss = flow_matching_loss(params, x0, x1, t, grads)
        if not np.isfinite(loss):
            raise FloatingPointError(f"pretraining diverged at step {step}")
        if loss_log is not None:
            loss_log.append(loss)
        opt.step(grads)
    return params
