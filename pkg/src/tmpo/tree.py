"""Stochastic tree rollouts: deterministic ODE segments, SDE noise injection at
scheduled branch steps, prefix-sharing construction and exact per-trajectory
log-probabilities.

Step conventions. A schedule with S steps holds noise levels sigma_0=1 >
... > sigma_S=0; "step k" is the transition sigma_k -> sigma_{k+1} with
dt_k = sigma_{k+1} - sigma_k < 0. A branch at step k replaces that
transition with a Gaussian kernel N(mu_theta(x, sigma_k), gamma^2 I); valid
branch steps therefore lie in [1, S-1] where sigma is strictly inside (0, 1).

A branch scheduled at step 1 is special: instead of perturbing a shared
parent, the B children restart from independent root noises advanced through
step 0, so they share no prefix. That branch's step log-probability is the
per-dimension-mean density of the child's own root under N(0, I), which does
not depend on the policy: its importance ratio is always 1 and it carries no
gradient.

All log-probabilities are per-dimension means (1/d scaling, d=2), applied
uniformly so the factor cancels in every ratio and softmax.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .net import EvalCounter, PolicyParams, velocity_batch

__all__ = [
    "DIM",
    "KIND_SDE",
    "KIND_RESEED",
    "NoiseSchedule",
    "BranchSchedule",
    "Trajectory",
    "RolloutTree",
    "ode_step",
    "ode_rollout_batch",
    "noise_magnitude",
    "drift_coefficients",
    "gaussian_logp_mean",
    "sde_branch_step",
    "beta_perturbation",
    "sample_branch_steps",
    "resolve_collisions",
    "rollout_tree",
    "rollout_independent",
    "replay_logp",
    "replay_terminal",
    "analytic_eval_count",
    "trajectory_to_bytes",
    "trajectory_from_bytes",
    "tree_to_jsonl",
]

DIM = 2
KIND_SDE = 0
KIND_RESEED = 1

_MU_BAR_CLAMP = 1e-3
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NoiseSchedule:
    """Noise levels sigma_0..sigma_S, descending from 1 to 0."""

    sigmas: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigmas, dtype=np.float64)
        object.__setattr__(self, "sigmas", s)
        if s.ndim != 1 or s.shape[0] < 2:
            raise ValueError("schedule needs at least two noise levels")
        if s[0] != 1.0 or s[-1] != 0.0:
            raise ValueError("schedule must run from sigma=1 to sigma=0")
        if not np.all(np.diff(s) < 0.0):
            raise ValueError("noise levels must be strictly decreasing")

    @classmethod
    def linear(cls, n_steps: int) -> "NoiseSchedule":
        if n_steps < 1:
            raise ValueError("need at least one step")
        return cls(1.0 - np.arange(n_steps + 1) / n_steps)

    @property
    def n_steps(self) -> int:
        return self.sigmas.shape[0] - 1

    def dt(self, k: int) -> float:
        return float(self.sigmas[k + 1] - self.sigmas[k])


@dataclass
class BranchSchedule:
    """Curriculum state for stochastic branch-step selection.

    Each branch position interpolates from early[i] to late[i] as progress
    goes 0 -> 1, then gets Beta-perturbed around that mean with concentration
    kappa before being rounded back to a step index.
    """

    early: np.ndarray
    late: np.ndarray
    kappa: float
    s_min: int
    s_max: int
    progress: float = 0.0
    branching_factor: int = 3

    def __post_init__(self):
        self.early = np.asarray(self.early, dtype=np.int64)
        self.late = np.asarray(self.late, dtype=np.int64)
        if self.early.ndim != 1 or self.early.shape != self.late.shape:
            raise ValueError("early/late positions must be 1-D and equally long")
        if self.early.shape[0] < 1:
            raise ValueError("need at least one branch point")
        if self.branching_factor < 2:
            raise ValueError("branching factor must be >= 2")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")
        if self.s_max <= self.s_min:
            raise ValueError("s_max must exceed s_min")
        for pos in (self.early, self.late):
            if np.any(pos < self.s_min) or np.any(pos > self.s_max):
                raise ValueError("curriculum positions must lie within [s_min, s_max]")
        if not 0.0 <= self.progress <= 1.0:
            raise ValueError("progress must lie in [0, 1]")

    @property
    def branch_count(self) -> int:
        return self.early.shape[0]


@dataclass
class Trajectory:
    """One leaf of a rollout tree.

    states[k] is the visited point at sigma_k for k = 0..S; terminal is
    states[S]. For branch t, states[branch_steps[t]] is the kernel input and
    states[branch_steps[t] + 1] the sampled child (reseed branches instead
    store their private root in states[0] and noises[t]).
    """

    branch_steps: np.ndarray   # (T,) int64
    noises: np.ndarray         # (T, 2)
    states: np.ndarray         # (S+1, 2)
    terminal: np.ndarray       # (2,)
    step_logps: np.ndarray     # (T,)
    logp_total: float
    gammas: np.ndarray         # (T,), 0 for reseed branches
    mus: np.ndarray            # (T, 2) rollout-time drift means, 0 for reseed
    kinds: np.ndarray          # (T,) uint8, KIND_SDE or KIND_RESEED

    @property
    def n_branches(self) -> int:
        return self.branch_steps.shape[0]


@dataclass
class RolloutTree:
    """K = B^T prefix-sharing trajectories plus the schedule they ran under."""

    root: np.ndarray
    branch_steps: np.ndarray
    leaves: list
    sched: NoiseSchedule
    eta: float
    branching_factor: int
    velocity_evals: int

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------

def ode_step(params: PolicyParams, x: np.ndarray, k: int, sched: NoiseSchedule,
             counter: EvalCounter | None = None) -> np.ndarray:
    """Euler step x + v(x, sigma_k) * dt_k for one state."""
    if not 0 <= k < sched.n_steps:
        raise ValueError("step index out of range")
    x = np.asarray(x, dtype=np.float64).reshape(1, DIM)
    return _ode_step_batch(params, x, k, sched, counter)[0]


def _ode_step_batch(params, xs, k, sched, counter):
    sigma = sched.sigmas[k]
    v = velocity_batch(params, xs, np.full(xs.shape[0], sigma), counter)
    return xs + v * sched.dt(k)


def ode_rollout_batch(params: PolicyParams, roots: np.ndarray, sched: NoiseSchedule,
                      counter: EvalCounter | None = None) -> np.ndarray:
    """Deterministic rollout of a batch of roots all the way to sigma = 0."""
    xs = np.asarray(roots, dtype=np.float64)
    for k in range(sched.n_steps):
        xs = _ode_step_batch(params, xs, k, sched, counter)
    return xs


def noise_magnitude(sigma: float, dt: float, eta: float) -> float:
    """Injected noise scale eta * sqrt(sigma / (1 - sigma)) * sqrt(-dt).

    eta = 0 is the diagnostic zero-noise case and simply returns 0.
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError("degenerate noise level")
    if dt >= 0.0:
        raise ValueError("dt must be negative")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    return eta * math.sqrt(sigma / (1.0 - sigma)) * math.sqrt(-dt)


def drift_coefficients(sigma: float, dt: float, gamma: float) -> tuple[float, float]:
    """Coefficients (a, b) of the marginal-preserving SDE drift
    mu = a * x + b * v(x, sigma) * dt."""
    g2 = gamma * gamma
    a = 1.0 + g2 * dt / (2.0 * sigma)
    b = 1.0 + g2 * (1.0 - sigma) / (2.0 * sigma)
    return a, b


def gaussian_logp_mean(child: np.ndarray, mu: np.ndarray, gamma: float) -> float:
    """Per-dimension-mean log N(child; mu, gamma^2 I)."""
    diff = np.asarray(child) - np.asarray(mu)
    sq = float(np.sum(diff * diff))
    return -sq / (2.0 * gamma * gamma * DIM) - 0.5 * math.log(2.0 * math.pi * gamma * gamma)


def reseed_logp_mean(root: np.ndarray) -> float:
    """Per-dimension-mean log N(root; 0, I) for a reseed branch."""
    sq = float(np.sum(np.asarray(root) ** 2))
    return -sq / (2.0 * DIM) - 0.5 * _LOG_2PI


def sde_branch_step(params: PolicyParams, x: np.ndarray, k: int, sched: NoiseSchedule,
                    eta: float, eps: np.ndarray,
                    counter: EvalCounter | None = None):
    """One stochastic transition at branch step k.

    Returns (child, logp_mean, mu, gamma).
    """
    if not 0 < k < sched.n_steps:
        raise ValueError("branch step must be an interior step index")
    sigma = float(sched.sigmas[k])
    dt = sched.dt(k)
    gamma = noise_magnitude(sigma, dt, eta)
    if gamma <= 0.0:
        raise ValueError("noise magnitude must be positive for an SDE step")
    x = np.asarray(x, dtype=np.float64).reshape(DIM)
    eps = np.asarray(eps, dtype=np.float64).reshape(DIM)
    v = velocity_batch(params, x[None, :], np.array([sigma]), counter)[0]
    a, b = drift_coefficients(sigma, dt, gamma)
    mu = a * x + b * v * dt
    child = mu + gamma * eps
    return child, gaussian_logp_mean(child, mu, gamma), mu, gamma


# ---------------------------------------------------------------------------
# branch-step sampling
# ---------------------------------------------------------------------------

def beta_perturbation(mu_bar: float, kappa: float, rng: np.random.Generator) -> float:
    """Draw xi ~ Beta(mu_bar * kappa, (1 - mu_bar) * kappa); mean is mu_bar."""
    return float(rng.beta(mu_bar * kappa, (1.0 - mu_bar) * kappa))


def sample_branch_steps(sched: BranchSchedule, rng: np.random.Generator) -> np.ndarray:
    """Sample sorted branch-step indices around the curriculum positions.

    Duplicates may appear here; rollout_tree resolves them.
    """
    span = sched.s_max - sched.s_min
    out = np.empty(sched.branch_count, dtype=np.int64)
    for i in range(sched.branch_count):
        mu = sched.early[i] + (sched.late[i] - sched.early[i]) * sched.progress
        mu_bar = (mu - sched.s_min) / span
        mu_bar = min(max(mu_bar, _MU_BAR_CLAMP), 1.0 - _MU_BAR_CLAMP)
        xi = beta_perturbation(mu_bar, sched.kappa, rng)
        out[i] = int(math.floor(sched.s_min + span * xi + 0.5))
    out.sort()
    return np.clip(out, sched.s_min, sched.s_max)


def resolve_collisions(steps: np.ndarray, s_min: int, s_max: int) -> np.ndarray:
    """Make sorted indices strictly increasing within [s_min, s_max].

    Later duplicates are pushed up by one; anything shoved past s_max is
    walked back down from the top so exactly T distinct steps remain. Needs
    s_max - s_min + 1 >= T.
    """
    steps = np.sort(np.asarray(steps, dtype=np.int64))
    t = steps.shape[0]
    if s_max - s_min + 1 < t:
        raise ValueError("not enough distinct step indices for all branch points")
    out = steps.copy()
    for i in range(1, t):
        if out[i] <= out[i - 1]:
            out[i] = out[i - 1] + 1
    for i in range(t - 1, -1, -1):
        cap = s_max - (t - 1 - i)
        if out[i] > cap:
            out[i] = cap
    for i in range(1, t):
        if out[i] <= out[i - 1]:
            out[i] = out[i - 1] + 1
    return out


# ---------------------------------------------------------------------------
# rollouts
# ---------------------------------------------------------------------------

def rollout_tree(params: PolicyParams, sched: NoiseSchedule,
                 branch_sched: BranchSchedule, eta: float,
                 rng: np.random.Generator,
                 counter: EvalCounter | None = None,
                 branch_steps: np.ndarray | None = None) -> RolloutTree:
    """Build a prefix-sharing rollout tree under a frozen policy.

    branch_steps overrides the schedule draw (fixed-branching ablation and
    tests); it is still passed through collision resolution.
    """
    own_counter = counter if counter is not None else EvalCounter()
    start = own_counter.count
    if branch_steps is None:
        steps = sample_branch_steps(branch_sched, rng)
    else:
        steps = np.asarray(branch_steps, dtype=np.int64)
    steps = resolve_collisions(steps, branch_sched.s_min, branch_sched.s_max)
    if steps[0] < 1 or steps[-1] > sched.n_steps - 1:
        raise ValueError("branch steps must lie strictly inside (0, S)")

    b = branch_sched.branching_factor
    t_count = steps.shape[0]
    s_total = sched.n_steps
    root = rng.standard_normal(DIM)

    # Frontier state: xs (n, 2), visited history (n, k_cur, 2), and per-branch
    # records replicated as the frontier fans out.
    reseed_first = steps[0] == 1
    br_noises: list[np.ndarray] = []
    br_logps: list[np.ndarray] = []
    br_gammas: list[float] = []
    br_mus: list[np.ndarray] = []
    br_kinds: list[int] = []

    if reseed_first:
        roots = rng.standard_normal((b, DIM))
        hist = roots[:, None, :].copy()
        xs = _ode_step_batch(params, roots, 0, sched, own_counter)
        hist = np.concatenate([hist, xs[:, None, :]], axis=1)
        br_noises.append(roots.copy())
        br_logps.append(np.array([reseed_logp_mean(r) for r in roots]))
        br_gammas.append(0.0)
        br_mus.append(np.zeros((b, DIM)))
        br_kinds.append(KIND_RESEED)
        k_cur = 1
        next_branch = 1
    else:
        xs = root[None, :].copy()
        hist = root[None, None, :].copy()
        k_cur = 0
        next_branch = 0

    for j in range(next_branch, t_count):
        target = int(steps[j])
        while k_cur < target:
            xs = _ode_step_batch(params, xs, k_cur, sched, own_counter)
            hist = np.concatenate([hist, xs[:, None, :]], axis=1)
            k_cur += 1
        n = xs.shape[0]
        sigma = float(sched.sigmas[target])
        dt = sched.dt(target)
        gamma = noise_magnitude(sigma, dt, eta)
        v = velocity_batch(params, xs, np.full(n, sigma), own_counter)
        a, bcoef = drift_coefficients(sigma, dt, gamma)
        mu = a * xs + bcoef * v * dt                      # (n, 2)
        eps = rng.standard_normal((n, b, DIM))
        if gamma > 0.0:
            children = mu[:, None, :] + gamma * eps
            diff = children - mu[:, None, :]
            logps = (-np.sum(diff * diff, axis=2) / (2.0 * gamma * gamma * DIM)
                     - 0.5 * math.log(2.0 * math.pi * gamma * gamma))
        else:
            # eta = 0 diagnostic: the branch collapses onto the drift and the
            # transition contributes nothing stochastic.
            children = np.broadcast_to(mu[:, None, :], (n, b, DIM)).copy()
            logps = np.zeros((n, b))
        br_noises.append(eps.reshape(n * b, DIM))
        br_logps.append(logps.reshape(n * b))
        br_gammas.append(gamma)
        br_mus.append(np.repeat(mu, b, axis=0))
        br_kinds.append(KIND_SDE)
        xs = children.reshape(n * b, DIM)
        hist = np.concatenate([np.repeat(hist, b, axis=0), xs[:, None, :]], axis=1)
        k_cur = target + 1

    while k_cur < s_total:
        xs = _ode_step_batch(params, xs, k_cur, sched, own_counter)
        hist = np.concatenate([hist, xs[:, None, :]], axis=1)
        k_cur += 1

    k_leaves = xs.shape[0]
    leaves = []
    for leaf in range(k_leaves):
        noises = np.empty((t_count, DIM))
        logps = np.empty(t_count)
        mus = np.empty((t_count, DIM))
        gammas = np.empty(t_count)
        kinds = np.empty(t_count, dtype=np.uint8)
        for j in range(t_count):
            # Branch j's records were stored for B^(j+1) frontier nodes; leaf
            # `leaf` descends from record index leaf // B^(T-1-j).
            stride = b ** (t_count - 1 - j)
            idx = leaf // stride
            noises[j] = br_noises[j][idx]
            logps[j] = br_logps[j][idx]
            mus[j] = br_mus[j][idx]
            gammas[j] = br_gammas[j]
            kinds[j] = br_kinds[j]
        leaves.append(Trajectory(
            branch_steps=steps.copy(),
            noises=noises,
            states=hist[leaf].copy(),
            terminal=hist[leaf, -1].copy(),
            step_logps=logps,
            logp_total=float(logps.sum()),
            gammas=gammas,
            mus=mus,
            kinds=kinds,
        ))
    return RolloutTree(
        root=root,
        branch_steps=steps,
        leaves=leaves,
        sched=sched,
        eta=eta,
        branching_factor=b,
        velocity_evals=own_counter.count - start,
    )


def rollout_independent(params: PolicyParams, sched: NoiseSchedule,
                        branch_sched: BranchSchedule, eta: float, k_group: int,
                        rng: np.random.Generator,
                        counter: EvalCounter | None = None,
                        branch_steps: np.ndarray | None = None) -> RolloutTree:
    """No-tree ablation: k_group fully independent rollouts.

    The stochastic structure (branch steps, reseed semantics, log-probability
    accounting) matches rollout_tree so the group algebra is unchanged; only
    prefix sharing is gone, so every step of every trajectory costs its own
    velocity evaluation.
    """
    own_counter = counter if counter is not None else EvalCounter()
    start = own_counter.count
    if branch_steps is None:
        steps = sample_branch_steps(branch_sched, rng)
    else:
        steps = np.asarray(branch_steps, dtype=np.int64)
    steps = resolve_collisions(steps, branch_sched.s_min, branch_sched.s_max)
    if steps[0] < 1 or steps[-1] > sched.n_steps - 1:
        raise ValueError("branch steps must lie strictly inside (0, S)")

    t_count = steps.shape[0]
    reseed_first = steps[0] == 1
    shared_root = rng.standard_normal(DIM)
    branch_set = {int(s) for s in steps[1:]} if reseed_first else {int(s) for s in steps}

    leaves = []
    for _ in range(k_group):
        noises = np.empty((t_count, DIM))
        logps = np.empty(t_count)
        mus = np.zeros((t_count, DIM))
        gammas = np.zeros(t_count)
        kinds = np.empty(t_count, dtype=np.uint8)
        j = 0
        if reseed_first:
            x = rng.standard_normal(DIM)
            noises[0] = x
            logps[0] = reseed_logp_mean(x)
            kinds[0] = KIND_RESEED
            j = 1
        else:
            x = shared_root.copy()
        hist = [x.copy()]
        for k in range(sched.n_steps):
            if k in branch_set:
                eps = rng.standard_normal(DIM)
                x, lp, mu, gamma = sde_branch_step(params, x, k, sched, eta, eps,
                                                   own_counter)
                noises[j] = eps
                logps[j] = lp
                mus[j] = mu
                gammas[j] = gamma
                kinds[j] = KIND_SDE
                j += 1
            else:
                x = ode_step(params, x, k, sched, own_counter)
            hist.append(x.copy())
        leaves.append(Trajectory(
            branch_steps=steps.copy(),
            noises=noises,
            states=np.stack(hist),
            terminal=hist[-1].copy(),
            step_logps=logps,
            logp_total=float(logps.sum()),
            gammas=gammas,
            mus=mus,
            kinds=kinds,
        ))
    return RolloutTree(
        root=shared_root,
        branch_steps=steps,
        leaves=leaves,
        sched=sched,
        eta=eta,
        branching_factor=branch_sched.branching_factor,
        velocity_evals=own_counter.count - start,
    )


def analytic_eval_count(branch_steps: np.ndarray, n_steps: int, b: int) -> int:
    """Velocity evaluations a prefix-sharing tree needs: one per node-step of
    every ODE segment plus one per parent at every SDE branch."""
    steps = np.asarray(branch_steps, dtype=np.int64)
    if steps[0] == 1:
        count = b * 1            # each reseed child runs step 0 itself
        frontier = b
        k_cur = 1
        start = 1
    else:
        count = 0
        frontier = 1
        k_cur = 0
        start = 0
    for j in range(start, steps.shape[0]):
        target = int(steps[j])
        count += frontier * (target - k_cur)   # ODE segment
        count += frontier                      # branch drift evaluation
        frontier *= b
        k_cur = target + 1
    count += frontier * (n_steps - k_cur)      # tail ODE segment
    return count


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

def replay_logp(params: PolicyParams, traj: Trajectory, sched: NoiseSchedule,
                counter: EvalCounter | None = None) -> np.ndarray:
    """Per-step log-probabilities of the recorded transitions under (possibly
    different) current parameters, evaluated at the recorded states."""
    if traj.states.shape != (sched.n_steps + 1, DIM):
        raise ValueError("trajectory states do not match the schedule length")
    out = np.empty(traj.n_branches)
    for j in range(traj.n_branches):
        if traj.kinds[j] == KIND_RESEED:
            out[j] = traj.step_logps[j]
            continue
        k = int(traj.branch_steps[j])
        sigma = float(sched.sigmas[k])
        dt = sched.dt(k)
        gamma = float(traj.gammas[j])
        x = traj.states[k]
        child = traj.states[k + 1]
        v = velocity_batch(params, x[None, :], np.array([sigma]), counter)[0]
        a, bcoef = drift_coefficients(sigma, dt, gamma)
        mu = a * x + bcoef * v * dt
        out[j] = gaussian_logp_mean(child, mu, gamma)
    return out


def replay_terminal(params: PolicyParams, traj: Trajectory, sched: NoiseSchedule) -> np.ndarray:
    """Re-integrate the recorded noises through the policy; returns the
    terminal state, which must match the recorded one for a frozen policy."""
    x = traj.states[0].copy()
    branch_of_step = {}
    for j in range(traj.n_branches):
        if traj.kinds[j] == KIND_SDE:
            branch_of_step[int(traj.branch_steps[j])] = j
    for k in range(sched.n_steps):
        if k in branch_of_step:
            j = branch_of_step[k]
            sigma = float(sched.sigmas[k])
            dt = sched.dt(k)
            gamma = float(traj.gammas[j])
            v = velocity_batch(params, x[None, :], np.array([sigma]))[0]
            a, bcoef = drift_coefficients(sigma, dt, gamma)
            x = a * x + bcoef * v * dt + gamma * traj.noises[j]
        else:
            x = ode_step(params, x, k, sched)
    return x


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_TRAJ_MAGIC = b"TRJ1"


def trajectory_to_bytes(traj: Trajectory) -> bytes:
    """Binary record: magic, u16 T, u16 S, branch steps as u16, kinds as u8,
    then noises / gammas / mus / step_logps / states as f64 little-endian."""
    t = traj.n_branches
    s = traj.states.shape[0] - 1
    parts = [
        _TRAJ_MAGIC,
        struct.pack("<HH", t, s),
        traj.branch_steps.astype("<u2").tobytes(),
        traj.kinds.astype("u1").tobytes(),
        traj.noises.astype("<f8").tobytes(),
        traj.gammas.astype("<f8").tobytes(),
        traj.mus.astype("<f8").tobytes(),
        traj.step_logps.astype("<f8").tobytes(),
        traj.states.astype("<f8").tobytes(),
    ]
    return b"".join(parts)


def trajectory_from_bytes(blob: bytes) -> Trajectory:
    if blob[:4] != _TRAJ_MAGIC:
        raise ValueError("not a trajectory record")
    t, s = struct.unpack("<HH", blob[4:8])
    off = 8
    def take(count, dtype, shape):
        nonlocal off
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        return arr.astype(np.float64).reshape(shape) if dtype != "u1" else arr.reshape(shape)
    steps = np.frombuffer(blob, dtype="<u2", count=t, offset=off).astype(np.int64); off += 2 * t
    kinds = np.frombuffer(blob, dtype="u1", count=t, offset=off).copy(); off += t
    noises = take(t * DIM, "<f8", (t, DIM))
    gammas = take(t, "<f8", (t,))
    mus = take(t * DIM, "<f8", (t, DIM))
    logps = take(t, "<f8", (t,))
    states = take((s + 1) * DIM, "<f8", (s + 1, DIM))
    return Trajectory(
        branch_steps=steps,
        noises=noises,
        states=states,
        terminal=states[-1].copy(),
        step_logps=logps,
        logp_total=float(logps.sum()),
        gammas=gammas,
        mus=mus,
        kinds=kinds,
    )


def tree_to_jsonl(tree: RolloutTree) -> str:
    """One JSON object per leaf, for eyeballing rollouts."""
    lines = []
    for i, leaf in enumerate(tree.leaves):
        lines.append(json.dumps({
            "leaf": i,
            "branch_steps": leaf.branch_steps.tolist(),
            "kinds": leaf.kinds.tolist(),
            "noises": leaf.noises.tolist(),
            "step_logps": leaf.step_logps.tolist(),
            "logp_total": leaf.logp_total,
            "terminal": leaf.terminal.tolist(),
        }, separators=(",", ":")))
    return "\n".join(lines) + "\n"
