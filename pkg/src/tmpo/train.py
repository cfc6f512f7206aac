"""Seeded training loops and evaluation plumbing behind the CLI verbs.

Outputs per post-training run directory:

    diagnostics.csv   one row per iteration (loss, divergences, clip cases, ...)
    metrics.csv       one row per periodic evaluation
    samples_<step>.csv  evaluation sample dumps (x, y, assigned_mode)
    samples_final.svg   scatter of the final evaluation colored by mode
    summary.json      final metrics and run metadata
    checkpoint.bin    final parameters

All CSV/JSON floats go through repr(), so identical config + seed gives
byte-identical outputs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .metrics import SampleSet, cosine_diversity, lgmd, mode_occupancy
from .mixture import MixtureSpec, reward_many
from .net import EvalCounter, GradBuffer, PolicyParams, load_params, save_params
from .objectives import (GroupBatch, RewardVec, beta_at_step, grpo_loss_and_grad,
                         kl_diagnostics, make_group_batch, tmpo_loss_and_grad)
from .optim import Adam
from .pretrain import pretrain_rectified_flow
from .svg import scatter_svg
from .tree import ode_rollout_batch, rollout_independent, rollout_tree, tree_to_jsonl

__all__ = ["run_pretrain", "run_posttrain", "run_ablation_suite",
           "evaluate_policy", "EvalResult", "ABLATION_VARIANTS"]

DIAG_HEADER = ("step,loss,mean_reward,fkl,rkl,tv,clip_in_region,clip_silenced,"
               "clip_corrective,beta,velocity_evals")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _row(values) -> str:
    return ",".join(_fmt(v) for v in values) + "\n"


@dataclass
class EvalResult:
    samples: np.ndarray
    mean_reward: float
    lgmd: float
    cosine_diversity: float
    fractions: np.ndarray
    max_fraction: float


def evaluate_policy(params: PolicyParams, cfg: RunConfig, spec: MixtureSpec) -> EvalResult:
    """Deterministic ODE sampling at the evaluation step count; the fixed
    eval seed keeps the root noises identical across evaluations."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg["eval.seed"]))
    roots = rng.standard_normal((cfg["eval.samples"], 2))
    samples = ode_rollout_batch(params, roots, cfg.eval_schedule())
    rewards = reward_many(spec, samples)
    occ = mode_occupancy(spec, SampleSet(samples))
    return EvalResult(
        samples=samples,
        mean_reward=float(rewards.mean()),
        lgmd=lgmd(SampleSet(samples)),
        cosine_diversity=cosine_diversity(SampleSet(samples)),
        fractions=occ.fractions,
        max_fraction=occ.max_fraction,
    )


def _write_samples_csv(path, samples: np.ndarray, spec: MixtureSpec):
    occ_idx = np.argmin(
        np.sum((samples[:, None, :] - spec.means()[None, :, :]) ** 2, axis=2), axis=1)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,assigned_mode\n")
        for (x, y), m in zip(samples, occ_idx):
            fh.write(_row([x, y, int(m)]))


def _metrics_header(spec: MixtureSpec) -> str:
    occ_cols = ",".join(f"occupancy_{i}" for i in range(spec.n_components))
    return f"step,mean_reward,lgmd,cosine_diversity,max_mode_fraction,{occ_cols}"


def run_pretrain(cfg: RunConfig, out_dir, seed: int | None = None) -> str:
    """Pretrain and write checkpoint.bin plus the loss curve; returns the
    checkpoint path."""
    os.makedirs(out_dir, exist_ok=True)
    if seed is not None:
        cfg = cfg.with_overrides(**{"model.seed": seed})
    spec = cfg.mixture()
    losses: list[float] = []
    params = pretrain_rectified_flow(spec, cfg.pretrain_config(), loss_log=losses)
    ckpt = os.path.join(out_dir, "checkpoint.bin")
    save_params(params, ckpt)
    with open(os.path.join(out_dir, "pretrain_loss.csv"), "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for i, loss in enumerate(losses):
            fh.write(_row([i, loss]))
    result = evaluate_policy(params, cfg, spec)
    with open(os.path.join(out_dir, "pretrain_metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write(_metrics_header(spec) + "\n")
        fh.write(_row([0, result.mean_reward, result.lgmd, result.cosine_diversity,
                       result.max_fraction, *result.fractions]))
    _write_samples_csv(os.path.join(out_dir, "pretrain_samples.csv"),
                       result.samples, spec)
    occ_idx = np.argmin(np.sum((result.samples[:, None, :]
                                - spec.means()[None, :, :]) ** 2, axis=2), axis=1)
    with open(os.path.join(out_dir, "pretrain_samples.svg"), "w", encoding="utf-8") as fh:
        fh.write(scatter_svg(result.samples, occ_idx, "pretrained samples",
                             markers=spec.means()))
    return ckpt


def run_posttrain(cfg: RunConfig, checkpoint: str, out_dir,
                  seed: int | None = None, dump_trees: bool = False) -> dict:
    """Post-train from a checkpoint; writes the run directory and returns the
    summary dict."""
    os.makedirs(out_dir, exist_ok=True)
    if seed is None:
        seed = cfg["model.seed"]
    algorithm = cfg["posttrain.algorithm"]
    loss_fn = tmpo_loss_and_grad if algorithm == "tmpo" else grpo_loss_and_grad

    spec = cfg.mixture()
    params = load_params(checkpoint)
    ref_params = params.copy()
    kl_coef = cfg.kl_ref_coef()
    grads = GradBuffer(params.hidden)
    opt = Adam(params, lr=cfg["posttrain.lr"])
    clip_cfg = cfg.clip_config()
    sched = cfg.train_schedule()
    steps = cfg["posttrain.steps"]
    n_groups = cfg["posttrain.groups"]
    inner_epochs = cfg["posttrain.inner_epochs"]
    eta = cfg["posttrain.eta"]
    no_tree = cfg["posttrain.no_tree"]
    fixed_branch = cfg["posttrain.fixed_branch"]
    fixed_steps = np.asarray(cfg["posttrain.early"]) if fixed_branch else None
    use_ema = cfg["posttrain.ema"]
    ema_flat = params.flat.copy()

    counter = EvalCounter()
    diag_path = os.path.join(out_dir, "diagnostics.csv")
    metrics_path = os.path.join(out_dir, "metrics.csv")
    trees_fh = open(os.path.join(out_dir, "trees.jsonl"), "w", encoding="utf-8") \
        if dump_trees else None
    fkl_trace: list[float] = []

    def eval_params() -> PolicyParams:
        if not use_ema:
            return params
        return PolicyParams(params.hidden, ema_flat.copy())

    with open(diag_path, "w", encoding="utf-8") as diag, \
            open(metrics_path, "w", encoding="utf-8") as metr:
        diag.write(DIAG_HEADER + "\n")
        metr.write(_metrics_header(spec) + "\n")
        for step in range(steps):
            progress = step / steps
            beta = beta_at_step(clip_cfg, step)
            branch_sched = cfg.branch_schedule(progress)

            batches: list[GroupBatch] = []
            for g in range(n_groups):
                rng = np.random.default_rng(
                    np.random.SeedSequence(entropy=seed, spawn_key=(step, g)))
                if no_tree:
                    group = rollout_independent(
                        params, sched, branch_sched, eta, cfg["posttrain.group_size"],
                        rng, counter, branch_steps=fixed_steps)
                else:
                    group = rollout_tree(params, sched, branch_sched, eta, rng,
                                         counter, branch_steps=fixed_steps)
                if trees_fh is not None:
                    trees_fh.write(tree_to_jsonl(group))
                terminals = np.stack([leaf.terminal for leaf in group.leaves])
                rewards = RewardVec(reward_many(spec, terminals), beta)
                batches.append(make_group_batch(group, rewards, params))

            last_stats = None
            mean_loss = 0.0
            for _ in range(inner_epochs):
                grads.zero()
                mean_loss = 0.0
                cases = np.zeros(3, dtype=np.int64)
                for batch in batches:
                    loss, stats = loss_fn(batch, params, clip_cfg, grads,
                                          ref_params=ref_params, kl_coef=kl_coef)
                    mean_loss += loss / n_groups
                    cases += (stats.n_in_region, stats.n_silenced, stats.n_corrective)
                if not np.isfinite(mean_loss):
                    raise FloatingPointError(f"non-finite loss at iteration {step}")
                grads.flat /= n_groups
                opt.step(grads)
                last_stats = cases
            if use_ema and (step + 1) % cfg["posttrain.ema_interval"] == 0:
                decay = cfg["posttrain.ema_decay"]
                ema_flat *= decay
                ema_flat += (1.0 - decay) * params.flat

            diags = [kl_diagnostics(b) for b in batches]
            fkl = float(np.mean([d.fkl for d in diags]))
            rkl = float(np.mean([d.rkl for d in diags]))
            tv = float(np.mean([d.tv for d in diags]))
            fkl_trace.append(fkl)
            mean_reward = float(np.mean([b.rewards.rewards.mean() for b in batches]))
            diag.write(_row([step, mean_loss, mean_reward, fkl, rkl, tv,
                             int(last_stats[0]), int(last_stats[1]),
                             int(last_stats[2]), beta, counter.count]))

            if (step + 1) % cfg["eval.interval"] == 0 or step == steps - 1:
                result = evaluate_policy(eval_params(), cfg, spec)
                metr.write(_row([step, result.mean_reward, result.lgmd,
                                 result.cosine_diversity, result.max_fraction,
                                 *result.fractions]))
                _write_samples_csv(os.path.join(out_dir, f"samples_{step}.csv"),
                                   result.samples, spec)
    if trees_fh is not None:
        trees_fh.close()

    final = evaluate_policy(eval_params(), cfg, spec)
    save_params(eval_params(), os.path.join(out_dir, "checkpoint.bin"))
    occ_idx = np.argmin(np.sum((final.samples[:, None, :]
                                - spec.means()[None, :, :]) ** 2, axis=2), axis=1)
    with open(os.path.join(out_dir, "samples_final.svg"), "w", encoding="utf-8") as fh:
        fh.write(scatter_svg(final.samples, occ_idx, f"{algorithm} samples",
                             markers=spec.means()))
    rewarded = spec.rewarded_indices()
    summary = {
        "algorithm": algorithm,
        "seed": seed,
        "steps": steps,
        "mean_reward": final.mean_reward,
        "lgmd": final.lgmd,
        "cosine_diversity": final.cosine_diversity,
        "occupancy": final.fractions.tolist(),
        "max_mode_fraction": final.max_fraction,
        "max_rewarded_fraction": float(final.fractions[rewarded].max()),
        "min_rewarded_fraction": float(final.fractions[rewarded].min()),
        "final_fkl": fkl_trace[-1] if fkl_trace else None,
        "fkl_trace_first": fkl_trace[0] if fkl_trace else None,
        "velocity_evals": counter.count,
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


ABLATION_VARIANTS = ("full", "fixed_beta", "no_tree", "fixed_branch")


def _variant_config(cfg: RunConfig, variant: str) -> RunConfig:
    if variant == "full":
        return cfg
    if variant == "fixed_beta":
        return cfg.with_overrides(**{"posttrain.beta_start": 1.0,
                                     "posttrain.beta_end": 1.0})
    if variant == "no_tree":
        return cfg.with_overrides(**{"posttrain.no_tree": True})
    if variant == "fixed_branch":
        return cfg.with_overrides(**{"posttrain.fixed_branch": True})
    raise ValueError(f"unknown ablation variant {variant!r}")


def run_ablation_suite(cfg: RunConfig, out_dir, seeds=(0, 1, 2, 3, 4)) -> dict:
    """Run {full, fixed-beta, no-tree, fixed-branch} at equal seeds/budgets.

    Writes per-run rows to ablation_runs.csv and a 4-row aggregate table to
    ablation.csv; returns {variant: [summary, ...]}.
    """
    os.makedirs(out_dir, exist_ok=True)
    cfg = cfg.with_overrides(**{"posttrain.algorithm": "tmpo"})
    results: dict[str, list] = {v: [] for v in ABLATION_VARIANTS}
    runs_path = os.path.join(out_dir, "ablation_runs.csv")
    with open(runs_path, "w", encoding="utf-8") as fh:
        fh.write("variant,seed,mean_reward,final_fkl,lgmd,max_mode_fraction,"
                 "velocity_evals\n")
        for seed in seeds:
            pre_dir = os.path.join(out_dir, f"pretrain_seed{seed}")
            ckpt = run_pretrain(cfg, pre_dir, seed=seed)
            for variant in ABLATION_VARIANTS:
                vcfg = _variant_config(cfg, variant).with_overrides(
                    **{"model.seed": seed})
                run_dir = os.path.join(out_dir, f"{variant}_seed{seed}")
                summary = run_posttrain(vcfg, ckpt, run_dir, seed=seed)
                results[variant].append(summary)
                fh.write(_row([variant, seed, summary["mean_reward"],
                               summary["final_fkl"], summary["lgmd"],
                               summary["max_mode_fraction"],
                               summary["velocity_evals"]]))
    with open(os.path.join(out_dir, "ablation.csv"), "w", encoding="utf-8") as fh:
        fh.write("variant,mean_reward,final_fkl,lgmd,max_mode_fraction,"
                 "velocity_evals\n")
        for variant in ABLATION_VARIANTS:
            rows = results[variant]
            fh.write(_row([
                variant,
                float(np.mean([r["mean_reward"] for r in rows])),
                float(np.mean([r["final_fkl"] for r in rows])),
                float(np.mean([r["lgmd"] for r in rows])),
                float(np.mean([r["max_mode_fraction"] for r in rows])),
                float(np.mean([r["velocity_evals"] for r in rows])),
            ]))
    return results
