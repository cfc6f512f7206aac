"""Velocity-field policy: a three-layer tanh MLP on (x1, x2, t) with exact
manual backpropagation and a portable flat-f64 checkpoint format.

Parameters live in one flat f64 vector; the weight matrices are reshaped
views into it, so optimizer updates on the flat vector are visible through
the views and vice versa.

Checkpoint byte layout (little-endian):

    bytes 0..3    magic b"TVF1"
    bytes 4..7    format version, u32 (currently 1)
    bytes 8..11   hidden width H, u32
    bytes 12..15  reserved, u32 zero
    bytes 16..    parameter vector, f64 LE, length 3H + H + H^2 + H + 2H + 2
"""

from __future__ import annotations

import struct

import numpy as np

from . import kernels

__all__ = [
    "PolicyParams",
    "GradBuffer",
    "EvalCounter",
    "init_params",
    "velocity",
    "velocity_batch",
    "velocity_backward",
    "velocity_backward_batch",
    "save_params",
    "load_params",
    "param_count",
]

MAGIC = b"TVF1"
FORMAT_VERSION = 1


def param_count(hidden: int) -> int:
    return 3 * hidden + hidden + hidden * hidden + hidden + 2 * hidden + 2


class _FlatViews:
    """Flat f64 vector plus named reshaped views of each layer."""

    __slots__ = ("hidden", "flat", "w1", "b1", "w2", "b2", "w3", "b3")

    def __init__(self, hidden: int, flat: np.ndarray | None = None):
        if hidden < 1:
            raise ValueError("hidden width must be >= 1")
        n = param_count(hidden)
        if flat is None:
            flat = np.zeros(n)
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (n,):
            raise ValueError(f"expected flat vector of length {n}, got {flat.shape}")
        self.hidden = hidden
        self.flat = flat
        o = 0
        self.w1 = flat[o:o + 3 * hidden].reshape(3, hidden); o += 3 * hidden
        self.b1 = flat[o:o + hidden]; o += hidden
        self.w2 = flat[o:o + hidden * hidden].reshape(hidden, hidden); o += hidden * hidden
        self.b2 = flat[o:o + hidden]; o += hidden
        self.w3 = flat[o:o + 2 * hidden].reshape(hidden, 2); o += 2 * hidden
        self.b3 = flat[o:o + 2]

    def copy(self):
        return type(self)(self.hidden, self.flat.copy())

    def all_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat)))


class PolicyParams(_FlatViews):
    """Weights and biases of the velocity MLP (input 3 -> H -> H -> output 2)."""


class GradBuffer(_FlatViews):
    """Gradient accumulator with the same layout as PolicyParams."""

    def zero(self):
        self.flat[:] = 0.0

    def add_from(self, gw1, gb1, gw2, gb2, gw3, gb3):
        self.w1 += gw1
        self.b1 += gb1
        self.w2 += gw2
        self.b2 += gb2
        self.w3 += gw3
        self.b3 += gb3


class EvalCounter:
    """Counts velocity-field evaluations (one unit per (x, t) row)."""

    __slots__ = ("count",)

    def __init__(self):
        self.count = 0

    def add(self, n: int):
        self.count += int(n)


def init_params(hidden: int = 64, seed: int = 0, x_scale: float = 4.0) -> PolicyParams:
    """Seeded initialization.

    The first-layer rows that see raw coordinates are shrunk by x_scale so
    the tanh units start unsaturated on data of that magnitude; biases start
    at zero and the output layer starts small.
    """
    rng = np.random.default_rng(seed)
    p = PolicyParams(hidden)
    p.w1[:] = rng.standard_normal((3, hidden)) / np.sqrt(3.0)
    p.w1[0:2, :] /= x_scale
    p.w2[:] = rng.standard_normal((hidden, hidden)) / np.sqrt(hidden)
    p.w3[:] = rng.standard_normal((hidden, 2)) / (4.0 * np.sqrt(hidden))
    return p


def _pack_inputs(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    xin = np.empty((x.shape[0], 3))
    xin[:, 0:2] = x
    xin[:, 2] = t
    return xin


def velocity_batch(params: PolicyParams, x: np.ndarray, t: np.ndarray,
                   counter: EvalCounter | None = None) -> np.ndarray:
    """Velocity at an (n, 2) batch of states and (n,) batch of times."""
    xin = _pack_inputs(np.asarray(x, dtype=np.float64),
                       np.asarray(t, dtype=np.float64))
    if counter is not None:
        counter.add(xin.shape[0])
    _, _, out = kernels.mlp_forward(params.w1, params.b1, params.w2, params.b2,
                                    params.w3, params.b3, xin)
    return out


def velocity(params: PolicyParams, x: np.ndarray, t: float,
             counter: EvalCounter | None = None) -> np.ndarray:
    """Velocity at a single state; validates the public contract."""
    x = np.asarray(x, dtype=np.float64).reshape(2)
    if not np.all(np.isfinite(x)) or not np.isfinite(t):
        raise ValueError("velocity requires finite inputs")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    return velocity_batch(params, x[None, :], np.array([t]), counter)[0]


def velocity_backward_batch(params: PolicyParams, x: np.ndarray, t: np.ndarray,
                            upstream: np.ndarray, grads: GradBuffer) -> np.ndarray:
    """Accumulate d(sum_n upstream_n . v_n)/dtheta into grads.

    Returns the (n, 2) gradient with respect to the state inputs.
    """
    xin = _pack_inputs(np.asarray(x, dtype=np.float64),
                       np.asarray(t, dtype=np.float64))
    upstream = np.ascontiguousarray(upstream, dtype=np.float64)
    h1, h2, _ = kernels.mlp_forward(params.w1, params.b1, params.w2, params.b2,
                                    params.w3, params.b3, xin)
    gw1, gb1, gw2, gb2, gw3, gb3, dxin = kernels.mlp_backward(
        params.w1, params.w2, params.w3, xin, h1, h2, upstream)
    grads.add_from(gw1, gb1, gw2, gb2, gw3, gb3)
    return dxin[:, 0:2]


def velocity_backward(params: PolicyParams, x: np.ndarray, t: float,
                      upstream: np.ndarray, grads: GradBuffer) -> np.ndarray:
    """Single-state backward pass; returns d(upstream . v)/dx as a 2-vector."""
    x = np.asarray(x, dtype=np.float64).reshape(2)
    upstream = np.asarray(upstream, dtype=np.float64).reshape(2)
    if not np.all(np.isfinite(upstream)):
        raise ValueError("upstream gradient must be finite")
    return velocity_backward_batch(params, x[None, :], np.array([t]),
                                   upstream[None, :], grads)[0]


def save_params(params: PolicyParams, path) -> None:
    header = MAGIC + struct.pack("<III", FORMAT_VERSION, params.hidden, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(params.flat.astype("<f8").tobytes())


def load_params(path) -> PolicyParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise ValueError("not a velocity-field checkpoint")
    version, hidden, _ = struct.unpack("<III", blob[4:16])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    flat = np.frombuffer(blob[16:], dtype="<f8").astype(np.float64)
    if flat.shape[0] != param_count(hidden):
        raise ValueError("checkpoint payload length does not match header")
    return PolicyParams(hidden, flat)
