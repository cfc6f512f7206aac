"""Hot numeric kernels: batched forward/backward through the velocity MLP.

Everything here operates on raw f64 arrays so the same source compiles under
numba and runs unmodified under numpy (see backend.py). Shapes:

    xin  (n, 3)   rows are (x1, x2, t)
    h1   (n, H)   first hidden tanh activations
    h2   (n, H)   second hidden tanh activations
    out  (n, 2)   velocity
"""

from __future__ import annotations

import numpy as np

from .backend import jit_kernel


@jit_kernel
def mlp_forward(w1, b1, w2, b2, w3, b3, xin):
    h1 = np.tanh(xin @ w1 + b1)
    h2 = np.tanh(h1 @ w2 + b2)
    out = h2 @ w3 + b3
    return h1, h2, out


@jit_kernel
def mlp_backward(w1, w2, w3, xin, h1, h2, upstream):
    """Backward pass for sum_n upstream[n] . out[n]; returns parameter grads and dxin."""
    gw3 = np.ascontiguousarray(h2.T) @ upstream
    gb3 = upstream.sum(axis=0)
    dh2 = upstream @ np.ascontiguousarray(w3.T)
    dz2 = dh2 * (1.0 - h2 * h2)
    gw2 = np.ascontiguousarray(h1.T) @ dz2
    gb2 = dz2.sum(axis=0)
    dh1 = dz2 @ np.ascontiguousarray(w2.T)
    dz1 = dh1 * (1.0 - h1 * h1)
    gw1 = np.ascontiguousarray(xin.T) @ dz1
    gb1 = dz1.sum(axis=0)
    dxin = dz1 @ np.ascontiguousarray(w1.T)
    return gw1, gb1, gw2, gb2, gw3, gb3, dxin
