"""Group objectives: the softmax trajectory-balance advantage, centered
importance ratios, the clipped distribution-matching loss with exact manual
gradients, and the z-scored reward-maximization baseline.

Within one group of K trajectories, q is the exponential-reward target
softmax(beta * R) and p the softmax of trajectory log-probabilities; the
advantage A_i = log q_i - log p_i is detached, so gradients flow only through
the importance ratio. Per-step log-ratios are centered by adding back the
deterministic shift |mu_new - mu_old|^2 / (2 gamma^2 d) before clipping; the
correction is recomputed every update but excluded from the gradient.

The old-side reference (old_logps, old drift means) is frozen by re-running
the rollout's branch transitions through the same batched evaluator the loss
uses. That guarantees the first update after a rollout sees ratios exactly 1
regardless of how the rollout batched its work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dists import FiniteDist, RewardVec, boltzmann_target, forward_kl, log_softmax, total_variation
from .mixture import group_zscore
from .net import GradBuffer, PolicyParams, velocity_batch, velocity_backward_batch
from .tree import DIM, KIND_SDE, NoiseSchedule, RolloutTree, drift_coefficients

__all__ = [
    "ClipConfig",
    "ClipStats",
    "GroupBatch",
    "KLDiagnostics",
    "beta_at_step",
    "softmax_tb_advantage",
    "ratio_norm_step",
    "make_group_batch",
    "tmpo_loss_and_grad",
    "grpo_loss_and_grad",
    "kl_diagnostics",
    "CASE_IN_REGION",
    "CASE_SILENCED",
    "CASE_CORRECTIVE",
]

CASE_IN_REGION = 1   # ratio inside the trust region, normal update
CASE_SILENCED = 2    # beneficial over-update, clipped branch active, zero grad
CASE_CORRECTIVE = 3  # harmful deviation, unclipped branch active, corrective grad


@dataclass(frozen=True)
class ClipConfig:
    """Trust-region width plus the reward-temperature warmup."""

    epsilon: float = 0.2
    beta_start: float = 0.8
    beta_end: float = 2.0
    warmup_steps: int = 150

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.beta_start > self.beta_end:
            raise ValueError("beta_start must not exceed beta_end")
        if self.warmup_steps < 1:
            raise ValueError("warmup_steps must be >= 1")


def beta_at_step(cfg: ClipConfig, step: int) -> float:
    """Linear warmup from beta_start to beta_end, constant afterwards."""
    if step < 0:
        raise ValueError("step must be >= 0")
    if step >= cfg.warmup_steps:
        return cfg.beta_end
    frac = step / cfg.warmup_steps
    return cfg.beta_start + (cfg.beta_end - cfg.beta_start) * frac


@dataclass
class ClipStats:
    """Per-trajectory clip diagnostics from one loss evaluation."""

    cases: np.ndarray          # (K,) values in {1, 2, 3}
    ratios: np.ndarray         # (K,) importance ratios
    n_in_region: int
    n_silenced: int
    n_corrective: int
    kl_penalty: float = 0.0
    degenerate: bool = False   # z-score guard tripped (baseline only)


@dataclass
class _BranchRows:
    """Flattened SDE transitions of a group, in (trajectory, branch) order."""

    traj: np.ndarray     # (R,) trajectory index
    branch: np.ndarray   # (R,) branch index within trajectory
    x: np.ndarray        # (R, 2) kernel input states
    child: np.ndarray    # (R, 2) sampled children
    sigma: np.ndarray    # (R,)
    dt: np.ndarray       # (R,)
    gamma: np.ndarray    # (R,)
    a: np.ndarray        # (R,) drift state coefficient
    b: np.ndarray        # (R,) drift velocity coefficient


@dataclass
class GroupBatch:
    """Everything one group contributes to an update."""

    trajectories: list
    rewards: RewardVec
    q: FiniteDist
    p: FiniteDist
    advantages: np.ndarray     # (K,) detached log q - log p
    is_ratios: np.ndarray      # (K,) ratios from the latest loss evaluation
    old_logps: np.ndarray      # (K, T) frozen per-step log-probabilities
    sched: NoiseSchedule
    rows: _BranchRows = field(repr=False)
    old_mu: np.ndarray = field(repr=False)        # (R, 2) frozen drift means
    old_row_logps: np.ndarray = field(repr=False)  # (R,) frozen row logps

    @property
    def k(self) -> int:
        return len(self.trajectories)


def softmax_tb_advantage(logps: np.ndarray, rewards: RewardVec):
    """Detached advantage of one group: (q, p, A) with A_i = log q_i - log p_i."""
    logps = np.asarray(logps, dtype=np.float64)
    if logps.ndim != 1 or logps.shape[0] < 2:
        raise ValueError("need K >= 2 trajectory log-probabilities")
    if logps.shape[0] != rewards.k:
        raise ValueError("log-probabilities and rewards must have the same length")
    if not np.all(np.isfinite(logps)):
        raise ValueError("trajectory log-probabilities must be finite")
    logq = log_softmax(rewards.beta * rewards.rewards)
    logp = log_softmax(logps)
    q = boltzmann_target(rewards)
    p = FiniteDist(np.exp(logp) / np.exp(logp).sum())
    return q, p, logq - logp


def ratio_norm_step(logp_new: float, logp_old: float, mu_new: np.ndarray,
                    mu_old: np.ndarray, gamma: float) -> float:
    """Centered per-step log-ratio: raw log-ratio plus the deterministic
    shift |mu_new - mu_old|^2 / (2 gamma^2 d). The shift is a detached
    constant during backprop; only the raw log-ratio carries gradient."""
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    dmu = np.asarray(mu_new, dtype=np.float64) - np.asarray(mu_old, dtype=np.float64)
    correction = float(np.sum(dmu * dmu)) / (2.0 * gamma * gamma * DIM)
    return (logp_new - logp_old) + correction


def _collect_rows(trajectories, sched: NoiseSchedule) -> _BranchRows:
    traj_idx, branch_idx, xs, childs, sigmas, dts, gammas, acoefs, bcoefs = \
        [], [], [], [], [], [], [], [], []
    for i, traj in enumerate(trajectories):
        for j in range(traj.n_branches):
            if traj.kinds[j] != KIND_SDE:
                continue
            k = int(traj.branch_steps[j])
            sigma = float(sched.sigmas[k])
            dt = sched.dt(k)
            gamma = float(traj.gammas[j])
            a, b = drift_coefficients(sigma, dt, gamma)
            traj_idx.append(i)
            branch_idx.append(j)
            xs.append(traj.states[k])
            childs.append(traj.states[k + 1])
            sigmas.append(sigma)
            dts.append(dt)
            gammas.append(gamma)
            acoefs.append(a)
            bcoefs.append(b)
    return _BranchRows(
        traj=np.asarray(traj_idx, dtype=np.int64),
        branch=np.asarray(branch_idx, dtype=np.int64),
        x=np.asarray(xs, dtype=np.float64).reshape(-1, DIM),
        child=np.asarray(childs, dtype=np.float64).reshape(-1, DIM),
        sigma=np.asarray(sigmas, dtype=np.float64),
        dt=np.asarray(dts, dtype=np.float64),
        gamma=np.asarray(gammas, dtype=np.float64),
        a=np.asarray(acoefs, dtype=np.float64),
        b=np.asarray(bcoefs, dtype=np.float64),
    )


def _evaluate_rows(params: PolicyParams, rows: _BranchRows):
    """Drift means and per-step log-probabilities for all rows in one batch."""
    if rows.x.shape[0] == 0:
        return np.zeros((0, DIM)), np.zeros(0)
    v = velocity_batch(params, rows.x, rows.sigma)
    mu = rows.a[:, None] * rows.x + rows.b[:, None] * v * rows.dt[:, None]
    diff = rows.child - mu
    g2 = rows.gamma * rows.gamma
    logp = (-np.sum(diff * diff, axis=1) / (2.0 * g2 * DIM)
            - 0.5 * np.log(2.0 * math.pi * g2))
    return mu, logp


def make_group_batch(group: RolloutTree, rewards: RewardVec,
                     params_old: PolicyParams) -> GroupBatch:
    """Freeze one rollout group into an update-ready batch.

    params_old must be the policy the group was rolled out under.
    """
    trajs = group.leaves
    k = len(trajs)
    if k < 2:
        raise ValueError("a group needs K >= 2 trajectories")
    if rewards.k != k:
        raise ValueError("rewards must have one entry per trajectory")
    t_count = trajs[0].n_branches
    rows = _collect_rows(trajs, group.sched)
    old_mu, old_row_logps = _evaluate_rows(params_old, rows)

    old_logps = np.empty((k, t_count))
    for i, traj in enumerate(trajs):
        old_logps[i] = traj.step_logps  # reseed rows keep their constants
    old_logps[rows.traj, rows.branch] = old_row_logps

    q, p, advantages = softmax_tb_advantage(old_logps.sum(axis=1), rewards)
    return GroupBatch(
        trajectories=trajs,
        rewards=rewards,
        q=q,
        p=p,
        advantages=advantages,
        is_ratios=np.ones(k),
        old_logps=old_logps,
        sched=group.sched,
        rows=rows,
        old_mu=old_mu,
        old_row_logps=old_row_logps,
    )


def _clipped_surrogate(batch: GroupBatch, params: PolicyParams, cfg: ClipConfig,
                       grads: GradBuffer, advantages: np.ndarray,
                       ref_params: PolicyParams | None, kl_coef: float):
    k = batch.k
    rows = batch.rows
    mu_new, logp_new = _evaluate_rows(params, rows)

    dmu = mu_new - batch.old_mu
    corrections = np.sum(dmu * dmu, axis=1) / (2.0 * rows.gamma ** 2 * DIM)
    centered = (logp_new - batch.old_row_logps) + corrections

    log_w = np.zeros(k)
    np.add.at(log_w, rows.traj, centered)
    w = np.exp(log_w)

    a_perp = advantages  # detached: never differentiated
    unclipped = w * a_perp
    clipped = np.clip(w, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon) * a_perp
    per_traj = np.minimum(unclipped, clipped)
    loss = -float(per_traj.mean())
    if not math.isfinite(loss):
        bad = int(np.flatnonzero(~np.isfinite(per_traj))[0])
        raise FloatingPointError(f"non-finite loss contribution from trajectory {bad}")

    in_region = (w >= 1.0 - cfg.epsilon) & (w <= 1.0 + cfg.epsilon)
    over = ((a_perp > 0) & (w > 1.0 + cfg.epsilon)) | ((a_perp < 0) & (w < 1.0 - cfg.epsilon))
    cases = np.full(k, CASE_CORRECTIVE, dtype=np.int64)
    cases[in_region | (a_perp == 0.0)] = CASE_IN_REGION
    cases[over & ~in_region] = CASE_SILENCED

    # Gradient flows only where the min picked the unclipped branch.
    grad_flows = unclipped <= clipped
    coef = np.where(grad_flows, -a_perp * w / k, 0.0)

    # d loss / d mu for each row: coef * d(log w)/d mu = coef * (child - mu)/(gamma^2 d);
    # the centering correction is detached and contributes nothing here.
    upstream_mu = coef[rows.traj, None] * (rows.child - mu_new) / (rows.gamma[:, None] ** 2 * DIM)

    kl_penalty = 0.0
    if kl_coef > 0.0 and ref_params is not None and rows.x.shape[0] > 0:
        mu_ref, _ = _evaluate_rows(ref_params, rows)
        dref = mu_new - mu_ref
        per_row = np.sum(dref * dref, axis=1) / (2.0 * rows.gamma ** 2 * DIM)
        kl_penalty = kl_coef * float(per_row.mean())
        loss += kl_penalty
        upstream_mu += (kl_coef / rows.x.shape[0]) * dref / (rows.gamma[:, None] ** 2 * DIM)

    if rows.x.shape[0] > 0:
        # mu = a x + b v dt, so d mu / d v = b dt per row.
        upstream_v = upstream_mu * (rows.b * rows.dt)[:, None]
        velocity_backward_batch(params, rows.x, rows.sigma, upstream_v, grads)

    batch.is_ratios = w
    stats = ClipStats(
        cases=cases,
        ratios=w,
        n_in_region=int(np.sum(cases == CASE_IN_REGION)),
        n_silenced=int(np.sum(cases == CASE_SILENCED)),
        n_corrective=int(np.sum(cases == CASE_CORRECTIVE)),
        kl_penalty=kl_penalty,
    )
    return loss, stats


def tmpo_loss_and_grad(batch: GroupBatch, params: PolicyParams, cfg: ClipConfig,
                       grads: GradBuffer, ref_params: PolicyParams | None = None,
                       kl_coef: float = 0.0):
    """Clipped distribution-matching loss; accumulates gradients into grads.

    The reference KL penalty is off by default; pass ref_params and a
    positive kl_coef to enable it.
    """
    return _clipped_surrogate(batch, params, cfg, grads, batch.advantages,
                              ref_params, kl_coef)


def grpo_loss_and_grad(batch: GroupBatch, params: PolicyParams, cfg: ClipConfig,
                       grads: GradBuffer, ref_params: PolicyParams | None = None,
                       kl_coef: float = 0.0):
    """Reward-maximization baseline: same clipped surrogate with z-scored
    reward advantages, which ignore the policy distribution entirely."""
    report = group_zscore(batch.rewards.rewards)
    loss, stats = _clipped_surrogate(batch, params, cfg, grads, report.zscored,
                                     ref_params, kl_coef)
    stats.degenerate = report.degenerate
    return loss, stats


@dataclass(frozen=True)
class KLDiagnostics:
    fkl: float
    rkl: float
    tv: float
    pinsker_ok: bool
    weighted_adv: float


def kl_diagnostics(batch: GroupBatch) -> KLDiagnostics:
    """Divergence diagnostics of one group; verifies that the q-weighted
    advantage reproduces the forward KL."""
    fkl = forward_kl(batch.q, batch.p)
    rkl = forward_kl(batch.p, batch.q)
    tv = total_variation(batch.q, batch.p)
    weighted_adv = float(np.dot(batch.q.probs, batch.advantages))
    if abs(weighted_adv - fkl) >= 1e-10:
        raise FloatingPointError(
            f"q-weighted advantage {weighted_adv} does not match forward KL {fkl}")
    return KLDiagnostics(
        fkl=fkl,
        rkl=rkl,
        tv=tv,
        pinsker_ok=tv <= math.sqrt(fkl / 2.0) + 1e-15,
        weighted_adv=weighted_adv,
    )
