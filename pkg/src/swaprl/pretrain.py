"""Next-token maximum-likelihood pretraining with a confidence penalty.

Rows are padded to a fixed 60-token window including BOS and EOS; lines whose
content cannot fit are skipped and counted rather than truncated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import torch
from torch import Tensor

from .optim import AdamState, adam_step, clip_grad_norm
from .policy import GruActor, named_params
from .vocab import Vocabulary


@dataclass(frozen=True)
class PretrainConfig:
    beta: float = 0.1  # confidence penalty strength
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    grad_clip: float = 10.0
    epochs: int = 1
    batch_size: int = 256
    seq_len: int = 60
    dropout: float = 0.2

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.grad_clip <= 0:
            raise ValueError("grad_clip must be > 0")


def mle_loss(logits: Tensor, targets: Tensor, mask: Tensor, beta: float) -> Tensor:
    """Masked cross entropy plus beta * sum_i p_i log p_i per kept position,
    averaged over the mask."""
    denom = mask.sum()
    if float(denom) == 0.0:
        raise ValueError("all positions masked")
    logp = torch.log_softmax(logits, dim=-1)
    nll = -logp.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    neg_entropy = (torch.exp(logp) * logp).sum(dim=-1)
    per_pos = nll + beta * neg_entropy
    return (per_pos * mask).sum() / denom


def encode_rows(
    lines: Sequence[str], v: Vocabulary, seq_len: int = 60
) -> tuple[list[list[int]], int]:
    """Tokenize lines into fixed-width rows [BOS, ..., EOS, PAD...]; returns
    (rows, skipped count) where skipped lines were too long to fit."""
    rows: list[list[int]] = []
    skipped = 0
    for line in lines:
        line = line.strip()
        if not line:
            continue
        toks = v.tokenize(line)
        if len(toks) > seq_len - 2:
            skipped += 1
            continue
        row = [v.bos] + toks + [v.eos]
        row += [v.pad] * (seq_len - len(row))
        rows.append(row)
    return rows, skipped


def batch_tensors(
    rows: Sequence[list[int]], v: Vocabulary
) -> tuple[Tensor, Tensor, Tensor]:
    """(inputs, targets, mask) for next-token training; mask is zero exactly
    at PAD target positions."""
    mat = torch.tensor(rows, dtype=torch.long)
    inputs = mat[:, :-1]
    targets = mat[:, 1:]
    mask = (targets != v.pad).to(torch.get_default_dtype())
    return inputs, targets, mask


def evaluate_loss(
    actor: GruActor, rows: Sequence[list[int]], v: Vocabulary, cfg: PretrainConfig
) -> float:
    """Mean per-token loss without dropout."""
    total, weight = 0.0, 0.0
    with torch.no_grad():
        for i in range(0, len(rows), cfg.batch_size):
            inputs, targets, mask = batch_tensors(rows[i : i + cfg.batch_size], v)
            logits = actor.sequence_logits(inputs)
            total += float(mle_loss(logits, targets, mask, cfg.beta)) * float(mask.sum())
            weight += float(mask.sum())
    return total / weight


def pretrain(
    lines: Iterable[str],
    v: Vocabulary,
    cfg: PretrainConfig,
    actor: GruActor,
    seed: int,
) -> tuple[AdamState, list[str], int]:
    """Train the actor in place for cfg.epochs shuffled epochs; returns the
    optimizer state, "step<TAB>loss" log lines, and the skipped-line count."""
    rows, skipped = encode_rows(list(lines), v, cfg.seq_len)
    if not rows:
        raise ValueError("no trainable rows in corpus")
    params = named_params(actor, "actor")
    state = AdamState.for_params(params)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0xD0])))
    drop_gen = torch.Generator().manual_seed(seed ^ 0x5EED)
    log: list[str] = []
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(rows))
        for i in range(0, len(rows), cfg.batch_size):
            batch = [rows[j] for j in order[i : i + cfg.batch_size]]
            inputs, targets, mask = batch_tensors(batch, v)
            logits = actor.sequence_logits(inputs, drop_gen=drop_gen if cfg.dropout > 0 else None)
            loss = mle_loss(logits, targets, mask, cfg.beta)
            if not torch.isfinite(loss):
                raise ValueError(f"non-finite pretraining loss at step {step}")
            grads = torch.autograd.grad(loss, list(params.values()))
            gdict = {k: g for k, g in zip(params.keys(), grads)}
            clip_grad_norm(gdict, cfg.grad_clip)
            adam_step(params, gdict, state, cfg.lr, cfg.beta1, cfg.beta2)
            log.append(f"{step}\t{float(loss.detach()):.6f}")
            step += 1
    return state, log, skipped
