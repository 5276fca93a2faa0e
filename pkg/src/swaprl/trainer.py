"""Terminal-reward token MDP and the PPO optimization loop.

Episodes append one token per step starting from BOS; every reward is zero
except at termination (EOS or the 60-token cap), where the swap-repair score
of the content tokens is returned. Collection runs in micro-collects; one
clipped PPO update follows each collect over the episodes completed so far,
and incomplete episode tails carry over to the next collect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from torch import Tensor

from .checkpoint import Checkpoint, save_checkpoint, tensors_from_module
from .optim import AdamState, adam_step, clip_grad_norm
from .policy import GruActor, GruCritic, named_params, param_count
from .swap_reward import RewardBreakdown, SwapRewardConfig, episode_rng
from .swap_reward import reward as score_episode
from .vocab import TokenPriors, Vocabulary


@dataclass(frozen=True)
class PpoConfig:
    steps_per_epoch: int = 512
    steps_per_collect: int = 60
    repeat_per_collect: int = 1
    batch_size: int = 512
    epochs: int = 1000
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    ent_coef: float = 0.01  # c_s
    vf_coef: float = 0.5  # c_v
    max_grad_norm: float = 0.5
    lr: float = 1e-4
    value_clip_eps: float = 0.2
    n_env: int = 1
    t_max: int = 60
    normalize_advantages: bool = False

    def __post_init__(self):
        if self.n_env != 1:
            raise ValueError("only n_env = 1 is supported")
        if not (0 < self.gamma <= 1 and 0 < self.gae_lambda <= 1):
            raise ValueError("gamma and gae_lambda must lie in (0, 1]")
        if not (0 < self.clip_eps < 1):
            raise ValueError("clip_eps must lie in (0, 1)")
        for name in ("steps_per_epoch", "steps_per_collect", "repeat_per_collect",
                     "batch_size", "epochs", "t_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class SmilesEnv:
    """Single token-appending environment with terminal-only reward."""

    def __init__(
        self,
        v: Vocabulary,
        priors: TokenPriors,
        reward_cfg: SwapRewardConfig,
        seed: int,
        t_max: int = 60,
    ):
        self.v = v
        self.priors = priors
        self.reward_cfg = reward_cfg
        self.seed = seed
        self.t_max = t_max
        self.episode_id = -1
        self.prefix: list[int] = []
        self.done = True
        self.last_breakdown: Optional[RewardBreakdown] = None

    def reset(self) -> int:
        self.episode_id += 1
        self.prefix = [self.v.bos]
        self.done = False
        self.last_breakdown = None
        return self.v.bos

    def step(self, action: int) -> tuple[int, float, bool]:
        if self.done:
            raise RuntimeError("step() after episode end")
        self.prefix.append(action)
        done = action == self.v.eos or len(self.prefix) >= self.t_max
        r = 0.0
        if done:
            self.done = True
            content = self.prefix[1:]
            if content and content[-1] == self.v.eos:
                content = content[:-1]
            rng = episode_rng(self.seed, self.episode_id)
            self.last_breakdown = score_episode(
                content, self.v, self.priors, self.reward_cfg, rng
            )
            r = self.last_breakdown.reward
        return action, r, done


def compute_gae(
    rewards, values, dones, gamma: float, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-step advantages and critic targets from TD residuals, with the
    value of a terminal successor fixed at zero."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if not (len(rewards) == len(values) == len(dones)):
        raise ValueError("rewards, values, dones must have equal length")
    n = len(rewards)
    adv = np.zeros(n)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        v_next = 0.0 if dones[t] else values[t + 1]
        delta = rewards[t] + gamma * v_next - values[t]
        acc = delta + gamma * lam * (0.0 if dones[t] else acc)
        adv[t] = acc
    return adv, adv + values


def ppo_loss(
    batch: dict[str, Tensor], actor: GruActor, critic: GruCritic, cfg: PpoConfig
) -> tuple[Tensor, dict[str, float]]:
    """Clipped surrogate + clipped value regression + entropy bonus.

    The batch carries per-transition observations, actions, frozen advantages
    and returns, behavior log-probs/values, and the hidden-state snapshots
    that reproduce rollout-time distributions.
    """
    logits, _ = actor.step(batch["obs"], batch["actor_h"])
    logp_all = torch.log_softmax(logits, dim=-1)
    logp = logp_all.gather(-1, batch["actions"].unsqueeze(-1)).squeeze(-1)
    entropy = -(torch.exp(logp_all) * logp_all).sum(dim=-1)

    ratio = torch.exp(logp - batch["logp_old"])
    if not torch.isfinite(ratio).all():
        bad = int((~torch.isfinite(ratio)).nonzero()[0])
        raise ValueError(f"non-finite probability ratio at transition {bad}")
    adv = batch["advantages"]
    surrogate = torch.minimum(
        ratio * adv,
        torch.clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv,
    ).mean()

    v_new, _ = critic.step(batch["obs"], batch["critic_h"])
    v_old = batch["v_old"]
    ret = batch["returns"]
    v_clipped = torch.clamp(v_new, v_old - cfg.value_clip_eps, v_old + cfg.value_clip_eps)
    value_loss = torch.maximum((v_new - ret) ** 2, (v_clipped - ret) ** 2).mean()

    ent = entropy.mean()
    total = -surrogate + cfg.vf_coef * value_loss - cfg.ent_coef * ent
    return total, {
        "surrogate": float(surrogate.detach()),
        "value_loss": float(value_loss.detach()),
        "entropy": float(ent.detach()),
    }


@dataclass
class _Transition:
    obs: int
    action: int
    logp_old: float
    v_old: float
    reward: float
    done: bool
    actor_h: Tensor  # (L, H) input state snapshots
    critic_h: Tensor


@dataclass
class EpisodeRecord:
    index: int
    length: int
    terminal_reward: float
    discounted_return: float
    breakdown: RewardBreakdown


@dataclass
class TrainResult:
    best_path: Optional[Path]
    final_path: Path
    episodes: list[EpisodeRecord]
    best_return: float
    log_lines: list[str] = field(default_factory=list)


def _make_checkpoint(
    actor: GruActor,
    critic: GruCritic,
    state: AdamState,
    seed: int,
    vocab_hash: int,
) -> Checkpoint:
    tensors = tensors_from_module(actor, "actor")
    tensors.update(tensors_from_module(critic, "critic"))
    opt = {f"adam_m/{k}": v.detach().cpu().numpy() for k, v in state.m.items()}
    opt.update({f"adam_v/{k}": v.detach().cpu().numpy() for k, v in state.v.items()})
    opt["adam/step"] = np.array(float(state.step), dtype=np.float32)
    return Checkpoint(
        tensors, opt, seed, vocab_hash, param_count(actor, critic)
    )


def train(
    actor: GruActor,
    critic: GruCritic,
    v: Vocabulary,
    priors: TokenPriors,
    ppo: PpoConfig,
    reward_cfg: SwapRewardConfig,
    seed: int,
    out_dir: str | Path,
) -> TrainResult:
    """Collect/update loop: ceil(steps_per_epoch / steps_per_collect) cycles
    per epoch, one PPO update per collect over completed episodes, best and
    final checkpoints written to out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    env = SmilesEnv(v, priors, reward_cfg, seed, ppo.t_max)
    sample_gen = torch.Generator().manual_seed(seed)
    params = named_params(actor, "actor")
    params.update(named_params(critic, "critic"))
    state = AdamState.for_params(params)
    vocab_hash = v.content_hash()

    pending: list[_Transition] = []
    ready: list[list[_Transition]] = []
    episodes: list[EpisodeRecord] = []
    log_lines: list[str] = []
    best_return = -math.inf
    best_dirty = False
    best_path: Optional[Path] = None

    obs = env.reset()
    actor_h = actor.init_hidden(1)
    critic_h = critic.init_hidden(1)

    for _epoch in range(ppo.epochs):
        done_this_epoch = 0
        while done_this_epoch < ppo.steps_per_epoch:
            n = min(ppo.steps_per_collect, ppo.steps_per_epoch - done_this_epoch)
            for _ in range(n):
                obs_t = torch.tensor([obs])
                with torch.no_grad():
                    logits, actor_h_next = actor.step(obs_t, actor_h)
                    logp_all = torch.log_softmax(logits[0], dim=-1)
                    action = int(
                        torch.multinomial(torch.exp(logp_all), 1, generator=sample_gen)
                    )
                    v_old, critic_h_next = critic.step(obs_t, critic_h)
                next_obs, r, done = env.step(action)
                pending.append(
                    _Transition(
                        obs,
                        action,
                        float(logp_all[action]),
                        float(v_old[0]),
                        r,
                        done,
                        actor_h[:, 0].clone(),
                        critic_h[:, 0].clone(),
                    )
                )
                if done:
                    T = len(pending)
                    disc = ppo.gamma ** (T - 1) * r
                    episodes.append(
                        EpisodeRecord(env.episode_id, T, r, disc, env.last_breakdown)
                    )
                    log_lines.append(f"{env.episode_id}\t{T}\t{r:.10g}\t{disc:.10g}")
                    # ties re-arm the snapshot so the saved checkpoint tracks
                    # the latest policy that attains the peak return
                    if disc >= best_return:
                        best_return = disc
                        best_dirty = True
                    ready.append(pending)
                    pending = []
                    obs = env.reset()
                    actor_h = actor.init_hidden(1)
                    critic_h = critic.init_hidden(1)
                else:
                    obs = next_obs
                    actor_h = actor_h_next
                    critic_h = critic_h_next
            done_this_epoch += n

            if best_dirty:
                best_path = out_dir / "best.ckpt"
                save_checkpoint(
                    best_path, _make_checkpoint(actor, critic, state, seed, vocab_hash)
                )
                best_dirty = False

            if not ready:
                continue
            batch = _assemble_batch(ready, ppo)
            ready = []
            for _ in range(ppo.repeat_per_collect):
                loss, _parts = ppo_loss(batch, actor, critic, ppo)
                grads = torch.autograd.grad(loss, list(params.values()), allow_unused=True)
                gdict = {
                    k: (g if g is not None else torch.zeros_like(p))
                    for (k, p), g in zip(params.items(), grads)
                }
                clip_grad_norm(gdict, ppo.max_grad_norm)
                adam_step(params, gdict, state, ppo.lr)

    final_path = out_dir / "final.ckpt"
    save_checkpoint(final_path, _make_checkpoint(actor, critic, state, seed, vocab_hash))
    (out_dir / "episodes.log").write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    return TrainResult(best_path, final_path, episodes, best_return, log_lines)


def _assemble_batch(ready: list[list["_Transition"]], ppo: PpoConfig) -> dict[str, Tensor]:
    trans: list[_Transition] = []
    advs: list[float] = []
    rets: list[float] = []
    for episode in ready:
        a, g = compute_gae(
            [t.reward for t in episode],
            [t.v_old for t in episode],
            [t.done for t in episode],
            ppo.gamma,
            ppo.gae_lambda,
        )
        trans.extend(episode)
        advs.extend(a.tolist())
        rets.extend(g.tolist())
    if len(trans) > ppo.batch_size:
        trans, advs, rets = (
            trans[: ppo.batch_size],
            advs[: ppo.batch_size],
            rets[: ppo.batch_size],
        )
    adv_t = torch.tensor(advs, dtype=torch.get_default_dtype())
    if ppo.normalize_advantages and len(advs) > 1:
        adv_t = (adv_t - adv_t.mean()) / (adv_t.std(unbiased=False) + 1e-8)
    return {
        "obs": torch.tensor([t.obs for t in trans], dtype=torch.long),
        "actions": torch.tensor([t.action for t in trans], dtype=torch.long),
        "logp_old": torch.tensor([t.logp_old for t in trans]),
        "v_old": torch.tensor([t.v_old for t in trans]),
        "advantages": adv_t,
        "returns": torch.tensor(rets, dtype=torch.get_default_dtype()),
        "actor_h": torch.stack([t.actor_h for t in trans], dim=1),
        "critic_h": torch.stack([t.critic_h for t in trans], dim=1),
    }
