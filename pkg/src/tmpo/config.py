"""Run configuration: a flat key = value text format and its validation.

Example file (every key optional; these are the defaults):

    # mixture geometry and rewards
    mixture.n_components = 5
    mixture.radius = 4.0
    mixture.cov_scale = 0.15
    mixture.weights = 0.24,0.24,0.24,0.04,0.24
    mixture.rewards = 1.0,1.0,1.0,0.5,0.05
    mixture.background_reward = 0.05

    model.hidden = 64
    model.seed = 0

    pretrain.steps = 4000
    pretrain.batch = 256
    pretrain.lr = 0.002

    posttrain.algorithm = tmpo        # tmpo | grpo
    posttrain.steps = 300
    posttrain.lr = 0.0005
    posttrain.groups = 8              # rollout groups per iteration
    posttrain.group_size = 27         # trajectories per group (B^T in tree mode)
    posttrain.train_steps = 6         # denoising steps during rollouts
    posttrain.eval_steps = 28         # denoising steps during evaluation
    posttrain.branch_count = 3        # stochastic branch points T
    posttrain.branching = 3           # children per branch B
    posttrain.eta = 0.7
    posttrain.epsilon = 0.2
    posttrain.beta_start = 0.8
    posttrain.beta_end = 2.0
    posttrain.beta_warmup = 150
    posttrain.kappa = 6.0
    posttrain.early = 1,2,3
    posttrain.late = 1,3,5
    posttrain.fixed_branch = false    # freeze branch positions at `early`
    posttrain.no_tree = false         # independent rollouts instead of a tree
    posttrain.inner_epochs = 2
    posttrain.kl_ref_coef = auto      # auto -> 0 for tmpo, 0.03 for grpo
    posttrain.ema = false
    posttrain.ema_decay = 0.9
    posttrain.ema_interval = 8

    eval.interval = 50
    eval.samples = 2000
    eval.seed = 1234

    output.dir = runs/default
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .mixture import MixtureSpec, ring_mixture
from .objectives import ClipConfig
from .pretrain import PretrainConfig
from .tree import BranchSchedule, NoiseSchedule

__all__ = ["RunConfig", "load_config", "parse_config_text", "ConfigError", "DEFAULTS"]


class ConfigError(ValueError):
    """Invalid configuration file or inconsistent settings."""


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _kl_coef(text: str):
    return None if text.strip().lower() == "auto" else float(text)


DEFAULTS = {
    "mixture.n_components": (int, 5),
    "mixture.radius": (float, 4.0),
    "mixture.cov_scale": (float, 0.15),
    "mixture.weights": (_floats, (0.24, 0.24, 0.24, 0.04, 0.24)),
    "mixture.rewards": (_floats, (1.0, 1.0, 1.0, 0.5, 0.05)),
    "mixture.background_reward": (float, 0.05),
    "model.hidden": (int, 64),
    "model.seed": (int, 0),
    "pretrain.steps": (int, 4000),
    "pretrain.batch": (int, 256),
    "pretrain.lr": (float, 2e-3),
    "posttrain.algorithm": (str, "tmpo"),
    "posttrain.steps": (int, 300),
    "posttrain.lr": (float, 5e-4),
    "posttrain.groups": (int, 8),
    "posttrain.group_size": (int, 27),
    "posttrain.train_steps": (int, 6),
    "posttrain.eval_steps": (int, 28),
    "posttrain.branch_count": (int, 3),
    "posttrain.branching": (int, 3),
    "posttrain.eta": (float, 0.7),
    "posttrain.epsilon": (float, 0.2),
    "posttrain.beta_start": (float, 0.8),
    "posttrain.beta_end": (float, 2.0),
    "posttrain.beta_warmup": (int, 150),
    "posttrain.kappa": (float, 6.0),
    "posttrain.early": (_ints, (1, 2, 3)),
    "posttrain.late": (_ints, (1, 3, 5)),
    "posttrain.fixed_branch": (_bool, False),
    "posttrain.no_tree": (_bool, False),
    "posttrain.inner_epochs": (int, 2),
    "posttrain.kl_ref_coef": (_kl_coef, None),
    "posttrain.ema": (_bool, False),
    "posttrain.ema_decay": (float, 0.9),
    "posttrain.ema_interval": (int, 8),
    "eval.interval": (int, 50),
    "eval.samples": (int, 2000),
    "eval.seed": (int, 1234),
    "output.dir": (str, "runs/default"),
}


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    def with_overrides(self, **pairs) -> "RunConfig":
        merged = dict(self.values)
        for key, val in pairs.items():
            if val is not None:
                merged[key] = val
        return replace(self, values=merged)

    # -- derived objects ----------------------------------------------------

    def mixture(self) -> MixtureSpec:
        return ring_mixture(
            n_components=self["mixture.n_components"],
            radius=self["mixture.radius"],
            cov_scale=self["mixture.cov_scale"],
            weights=self["mixture.weights"],
            reward_values=self["mixture.rewards"],
            background_reward=self["mixture.background_reward"],
        )

    def pretrain_config(self) -> PretrainConfig:
        return PretrainConfig(
            steps=self["pretrain.steps"],
            batch_size=self["pretrain.batch"],
            lr=self["pretrain.lr"],
            hidden=self["model.hidden"],
            seed=self["model.seed"],
        )

    def clip_config(self) -> ClipConfig:
        return ClipConfig(
            epsilon=self["posttrain.epsilon"],
            beta_start=self["posttrain.beta_start"],
            beta_end=self["posttrain.beta_end"],
            warmup_steps=self["posttrain.beta_warmup"],
        )

    def train_schedule(self) -> NoiseSchedule:
        return NoiseSchedule.linear(self["posttrain.train_steps"])

    def eval_schedule(self) -> NoiseSchedule:
        return NoiseSchedule.linear(self["posttrain.eval_steps"])

    def branch_schedule(self, progress: float = 0.0) -> BranchSchedule:
        return BranchSchedule(
            early=np.asarray(self["posttrain.early"]),
            late=np.asarray(self["posttrain.late"]),
            kappa=self["posttrain.kappa"],
            s_min=1,
            s_max=self["posttrain.train_steps"] - 1,
            progress=progress,
            branching_factor=self["posttrain.branching"],
        )

    def kl_ref_coef(self) -> float:
        coef = self["posttrain.kl_ref_coef"]
        if coef is None:
            return 0.03 if self["posttrain.algorithm"] == "grpo" else 0.0
        return float(coef)

    def validate(self) -> "RunConfig":
        algo = self["posttrain.algorithm"]
        if algo not in ("tmpo", "grpo"):
            raise ConfigError(f"posttrain.algorithm must be tmpo or grpo, got {algo!r}")
        b = self["posttrain.branching"]
        t = self["posttrain.branch_count"]
        k = self["posttrain.group_size"]
        if not self["posttrain.no_tree"] and b ** t != k:
            raise ConfigError(
                f"tree mode needs group_size == branching^branch_count, got {k} != {b}^{t}")
        s = self["posttrain.train_steps"]
        if len(self["posttrain.early"]) != t or len(self["posttrain.late"]) != t:
            raise ConfigError("early/late positions must list branch_count entries")
        for pos in (*self["posttrain.early"], *self["posttrain.late"]):
            if not 1 <= pos <= s - 1:
                raise ConfigError(f"branch position {pos} outside (0, {s})")
        if s - 1 < t:
            raise ConfigError("not enough interior steps for all branch points")
        if not 0.0 <= self["posttrain.eta"] <= 1.0:
            raise ConfigError("posttrain.eta must lie in [0, 1]")
        self.mixture()
        self.pretrain_config()
        self.clip_config()
        self.branch_schedule()
        return self


def parse_config_text(text: str) -> RunConfig:
    values = {key: default for key, (_, default) in DEFAULTS.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        parser, _ = DEFAULTS[key]
        try:
            values[key] = parser(val)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return RunConfig(values).validate()


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig({key: default for key, (_, default) in DEFAULTS.items()}).validate()
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
