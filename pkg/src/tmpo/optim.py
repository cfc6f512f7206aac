"""Adam on the flat parameter vector (beta1=0.9, beta2=0.999, no weight decay)."""

from __future__ import annotations

import numpy as np

from .net import GradBuffer, PolicyParams

__all__ = ["Adam"]


class Adam:
    def __init__(self, params: PolicyParams, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros_like(params.flat)
        self.v = np.zeros_like(params.flat)
        self.t = 0

    def step(self, grads: GradBuffer):
        if not np.all(np.isfinite(grads.flat)):
            raise FloatingPointError("non-finite gradient in optimizer step")
        self.t += 1
        g = grads.flat
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g
        mhat = self.m / (1.0 - self.beta1 ** self.t)
        vhat = self.v / (1.0 - self.beta2 ** self.t)
        self.params.flat -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
        if not self.params.all_finite():
            raise FloatingPointError("non-finite parameter after optimizer step")
