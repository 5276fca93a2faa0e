"""Flat "key = value" run configuration shared by every subcommand.

Unknown keys are rejected, flags win over file values, and the effective
configuration is dumped next to the outputs of each run so every artifact can
be reproduced from its directory alone.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .pretrain import PretrainConfig
from .swap_reward import SwapRewardConfig
from .trainer import PpoConfig


class ConfigError(ValueError):
    pass


def _parse_bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


@dataclass
class RunConfig:
    # rollout / optimization
    steps_per_epoch: int = 512
    steps_per_collect: int = 60
    repeat_per_collect: int = 1
    batch_size: int = 512
    epochs: int = 1000
    lr: Optional[float] = None  # regime default: 1e-4 for prl, 1e-8 for frl
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    max_grad_norm: float = 0.5
    value_clip_eps: float = 0.2
    n_env: int = 1
    normalize_advantages: bool = False
    # reward
    k_subst: int = 8
    lambda_swap: float = 0.20
    lambda_err: float = 0.50
    lambda_dist: float = 0.30
    e_max: int = 12
    # model
    d_hidden: int = 512
    n_layers: int = 3
    d_embed: int = 0  # 0 = twice the vocabulary size
    dropout: float = 0.2
    head_concat: str = "top"  # "top" = [output; top hidden], "all" = every layer
    t_max: int = 60
    # pretraining
    pretrain_beta: float = 0.1
    pretrain_lr: float = 1e-3
    pretrain_grad_clip: float = 10.0
    pretrain_epochs: int = 1
    pretrain_batch_size: int = 256
    # run
    mode: str = "prl"
    seed: int = 0
    sample_n: int = 10000
    threads: int = 0  # 0 = leave torch defaults
    # paths
    corpus: str = ""
    vocab: str = ""
    priors: str = ""
    init_checkpoint: str = ""
    checkpoint: str = ""
    out_dir: str = ""
    samples: str = ""
    report: str = ""

    def resolved_lr(self) -> float:
        if self.lr is not None:
            return self.lr
        return 1e-4 if self.mode == "prl" else 1e-8

    def ppo(self) -> PpoConfig:
        return PpoConfig(
            steps_per_epoch=self.steps_per_epoch,
            steps_per_collect=self.steps_per_collect,
            repeat_per_collect=self.repeat_per_collect,
            batch_size=self.batch_size,
            epochs=self.epochs,
            gamma=self.gamma,
            gae_lambda=self.gae_lambda,
            clip_eps=self.clip_eps,
            ent_coef=self.ent_coef,
            vf_coef=self.vf_coef,
            max_grad_norm=self.max_grad_norm,
            lr=self.resolved_lr(),
            value_clip_eps=self.value_clip_eps,
            n_env=self.n_env,
            t_max=self.t_max,
            normalize_advantages=self.normalize_advantages,
        )

    def swap_reward_cfg(self) -> SwapRewardConfig:
        return SwapRewardConfig(
            k_subst=self.k_subst,
            lambda_swap=self.lambda_swap,
            lambda_err=self.lambda_err,
            lambda_dist=self.lambda_dist,
            e_max=self.e_max,
        )

    def pretrain_cfg(self) -> PretrainConfig:
        return PretrainConfig(
            beta=self.pretrain_beta,
            lr=self.pretrain_lr,
            grad_clip=self.pretrain_grad_clip,
            epochs=self.pretrain_epochs,
            batch_size=self.pretrain_batch_size,
            seq_len=self.t_max,
            dropout=self.dropout,
        )


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    t = _FIELD_TYPES[key]
    if t in ("int", int):
        return int(raw)
    if t in ("float", float):
        return float(raw)
    if t in ("bool", bool):
        return _parse_bool(raw)
    if t in ("Optional[float]",):
        return None if raw.lower() in ("", "none", "auto") else float(raw)
    return raw


def parse_config_text(text: str) -> dict[str, object]:
    out: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            out[key] = _convert(key, raw)
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {e}") from e
    return out


def load_config(path: str | Path) -> RunConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8"))
    return RunConfig(**values)


def apply_overrides(cfg: RunConfig, overrides: dict[str, object]) -> RunConfig:
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r}")
        setattr(cfg, key, value)
    return cfg


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if v is None:
            v = "auto"
        elif isinstance(v, bool):
            v = int(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
