"""Recurrent token generator (actor) and value estimator (critic).

Both share the same backbone: embedding of width 2|V|, a stack of GRU layers,
and a head fed with the concatenation of the top layer's output and hidden
state (the two coincide step-by-step in a GRU; the stated architecture keeps
the redundancy). Dropout applies to embeddings and between layers, and only
when a generator is passed (pretraining); rollout and PPO scoring run
dropout-free so sampled log-probs stay consistent with re-scoring.
"""

from __future__ import annotations

from typing import Optional

import torch
from torch import Tensor, nn


def _init_linear(w: Tensor, b: Optional[Tensor], gen: torch.Generator) -> None:
    nn.init.xavier_uniform_(w, generator=gen)
    if b is not None:
        nn.init.zeros_(b)


class GruCell(nn.Module):
    """Standard reset/update/candidate GRU cell, weights packed [r; z; n]."""

    def __init__(self, d_in: int, d_hidden: int, gen: torch.Generator):
        super().__init__()
        self.d_hidden = d_hidden
        self.weight_ih = nn.Parameter(torch.empty(3 * d_hidden, d_in))
        self.weight_hh = nn.Parameter(torch.empty(3 * d_hidden, d_hidden))
        self.bias_ih = nn.Parameter(torch.zeros(3 * d_hidden))
        self.bias_hh = nn.Parameter(torch.zeros(3 * d_hidden))
        nn.init.xavier_uniform_(self.weight_ih, generator=gen)
        with torch.no_grad():
            for k in range(3):  # orthogonal per gate block
                block = torch.empty(d_hidden, d_hidden)
                nn.init.orthogonal_(block, generator=gen)
                self.weight_hh[k * d_hidden : (k + 1) * d_hidden].copy_(block)

    def forward(self, x: Tensor, h: Tensor) -> Tensor:
        gi = x @ self.weight_ih.T + self.bias_ih
        gh = h @ self.weight_hh.T + self.bias_hh
        i_r, i_z, i_n = gi.chunk(3, dim=-1)
        h_r, h_z, h_n = gh.chunk(3, dim=-1)
        r = torch.sigmoid(i_r + h_r)
        z = torch.sigmoid(i_z + h_z)
        n = torch.tanh(i_n + r * h_n)
        return (1.0 - z) * n + z * h


def _dropout(x: Tensor, p: float, gen: Optional[torch.Generator]) -> Tensor:
    if gen is None or p <= 0.0:
        return x
    keep = (torch.rand(x.shape, generator=gen, device=x.device) >= p).to(x.dtype)
    return x * keep / (1.0 - p)


class GruBackbone(nn.Module):
    def __init__(
        self,
        n_tokens: int,
        d_hidden: int,
        n_layers: int,
        d_embed: Optional[int] = None,
        dropout: float = 0.2,
        init_seed: int = 0,
        wide_head: bool = False,
    ):
        super().__init__()
        self.n_tokens = n_tokens
        self.d_embed = d_embed if d_embed is not None else 2 * n_tokens
        self.d_hidden = d_hidden
        self.n_layers = n_layers
        self.dropout = dropout
        # heads see [output ; top hidden] by default, or every layer's hidden
        self.wide_head = wide_head
        self.head_width = d_hidden * (1 + (n_layers if wide_head else 1))
        gen = torch.Generator().manual_seed(init_seed)
        self.embedding = nn.Parameter(torch.empty(n_tokens, self.d_embed))
        nn.init.xavier_uniform_(self.embedding, generator=gen)
        self.cells = nn.ModuleList(
            [
                GruCell(self.d_embed if i == 0 else d_hidden, d_hidden, gen)
                for i in range(n_layers)
            ]
        )
        self._init_gen = gen  # heads continue the stream

    def init_hidden(self, batch: int, dtype=None, device=None) -> Tensor:
        p = self.embedding
        return torch.zeros(
            self.n_layers,
            batch,
            self.d_hidden,
            dtype=dtype or p.dtype,
            device=device or p.device,
        )

    def step(
        self, tokens: Tensor, h: Tensor, drop_gen: Optional[torch.Generator] = None
    ) -> tuple[Tensor, Tensor]:
        """One step for a (B,) token batch; returns (head features, h')."""
        x = _dropout(self.embedding[tokens], self.dropout, drop_gen)
        new_h = []
        for i, cell in enumerate(self.cells):
            hi = cell(x, h[i])
            new_h.append(hi)
            x = hi
            if i < self.n_layers - 1:
                x = _dropout(x, self.dropout, drop_gen)
        hidden = new_h if self.wide_head else [new_h[-1]]
        return torch.cat([x] + hidden, dim=-1), torch.stack(new_h)

    def run(
        self, tokens: Tensor, drop_gen: Optional[torch.Generator] = None
    ) -> Tensor:
        """Teacher-forced pass over (B, T) tokens from a zero state; returns
        per-step head features (B, T, head_width). Layer-major for locality."""
        B, T = tokens.shape
        x = _dropout(self.embedding[tokens], self.dropout, drop_gen)
        layer_outs = []
        for i, cell in enumerate(self.cells):
            h = torch.zeros(B, self.d_hidden, dtype=x.dtype, device=x.device)
            outs = []
            for t in range(T):
                h = cell(x[:, t], h)
                outs.append(h)
            x = torch.stack(outs, dim=1)
            layer_outs.append(x)
            if i < self.n_layers - 1:
                x = _dropout(x, self.dropout, drop_gen)
        hidden = layer_outs if self.wide_head else [layer_outs[-1]]
        return torch.cat([layer_outs[-1]] + hidden, dim=-1)


class GruActor(nn.Module):
    def __init__(self, n_tokens: int, d_hidden: int = 512, n_layers: int = 3,
                 d_embed: Optional[int] = None, dropout: float = 0.2, init_seed: int = 0,
                 wide_head: bool = False):
        super().__init__()
        self.backbone = GruBackbone(n_tokens, d_hidden, n_layers, d_embed, dropout,
                                    init_seed, wide_head)
        self.head = nn.Linear(self.backbone.head_width, n_tokens)
        _init_linear(self.head.weight, self.head.bias, self.backbone._init_gen)

    @property
    def n_tokens(self) -> int:
        return self.backbone.n_tokens

    def init_hidden(self, batch: int) -> Tensor:
        return self.backbone.init_hidden(batch)

    def step(self, tokens: Tensor, h: Tensor,
             drop_gen: Optional[torch.Generator] = None) -> tuple[Tensor, Tensor]:
        """forward_step: (B,) tokens + (L,B,H) state -> ((B,|V|) logits, state')."""
        if int(tokens.max()) >= self.n_tokens or int(tokens.min()) < 0:
            raise ValueError("token index out of range")
        feats, h2 = self.backbone.step(tokens, h, drop_gen)
        return self.head(feats), h2

    def sequence_logits(self, tokens: Tensor,
                        drop_gen: Optional[torch.Generator] = None) -> Tensor:
        """(B, T) -> (B, T, |V|) teacher-forced logits from zero state."""
        return self.head(self.backbone.run(tokens, drop_gen))


class GruCritic(nn.Module):
    """Actor-shaped backbone plus a one-hidden-layer tanh value head."""

    def __init__(self, n_tokens: int, d_hidden: int = 512, n_layers: int = 3,
                 d_embed: Optional[int] = None, dropout: float = 0.2, init_seed: int = 1,
                 wide_head: bool = False):
        super().__init__()
        self.backbone = GruBackbone(n_tokens, d_hidden, n_layers, d_embed, dropout,
                                    init_seed, wide_head)
        self.fc = nn.Linear(self.backbone.head_width, d_hidden)
        self.out = nn.Linear(d_hidden, 1)
        _init_linear(self.fc.weight, self.fc.bias, self.backbone._init_gen)
        _init_linear(self.out.weight, self.out.bias, self.backbone._init_gen)

    def init_hidden(self, batch: int) -> Tensor:
        return self.backbone.init_hidden(batch)

    def step(self, tokens: Tensor, h: Tensor) -> tuple[Tensor, Tensor]:
        feats, h2 = self.backbone.step(tokens, h)
        return self.out(torch.tanh(self.fc(feats))).squeeze(-1), h2

    def value(self, prefix: Tensor) -> Tensor:
        """Scalar value of a (T,) prefix that begins with BOS."""
        feats = self.backbone.run(prefix.unsqueeze(0))
        return self.out(torch.tanh(self.fc(feats[0, -1]))).squeeze(-1)


def sample_sequence(
    actor: GruActor,
    bos: int,
    eos: int,
    rng: torch.Generator,
    t_max: int = 60,
) -> tuple[list[int], list[float], list[float]]:
    """Multinomial sampling from BOS and a zero state. BOS and EOS count
    toward the cap; EOS is included when emitted. Returns the token list and
    the per-step log-probs and entropies of the sampled steps."""
    with torch.no_grad():
        h = actor.init_hidden(1)
        tok = torch.tensor([bos])
        seq = [bos]
        logprobs: list[float] = []
        entropies: list[float] = []
        while len(seq) < t_max:
            logits, h = actor.step(tok, h)
            logp = torch.log_softmax(logits[0], dim=-1)
            nxt = int(torch.multinomial(torch.exp(logp), 1, generator=rng))
            logprobs.append(float(logp[nxt]))
            entropies.append(float(-(torch.exp(logp) * logp).sum()))
            seq.append(nxt)
            if nxt == eos:
                break
            tok = torch.tensor([nxt])
        return seq, logprobs, entropies


def logprob_entropy(actor: GruActor, seq: list[int]) -> tuple[Tensor, Tensor]:
    """Teacher-forced log-probs of the realized tokens and full-distribution
    entropies for a BOS-initial sequence; both have length len(seq) - 1."""
    tokens = torch.tensor(seq, dtype=torch.long).unsqueeze(0)
    logits = actor.sequence_logits(tokens[:, :-1])
    logp = torch.log_softmax(logits[0], dim=-1)
    realized = logp[torch.arange(len(seq) - 1), tokens[0, 1:]]
    entropy = -(torch.exp(logp) * logp).sum(dim=-1)
    return realized, entropy


def param_count(*modules: nn.Module) -> int:
    return sum(p.numel() for m in modules for p in m.parameters())


def named_params(module: nn.Module, prefix: str) -> dict[str, Tensor]:
    return {f"{prefix}/{name}": p for name, p in module.named_parameters()}


def gradients(loss: Tensor, modules: dict[str, nn.Module]) -> dict[str, Tensor]:
    """Exact gradients of a scalar loss for every named parameter tensor."""
    if not torch.isfinite(loss):
        raise ValueError(f"non-finite loss {float(loss)!r}")
    params: dict[str, Tensor] = {}
    for prefix, m in modules.items():
        params.update(named_params(m, prefix))
    grads = torch.autograd.grad(
        loss, list(params.values()), allow_unused=True, retain_graph=False
    )
    out = {}
    for (name, p), g in zip(params.items(), grads):
        out[name] = torch.zeros_like(p) if g is None else g
    return out
