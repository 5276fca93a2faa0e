"""Two-stage swap-repair terminal reward.

Stage one hunts for a single token substitution that makes an unparseable
sequence parse; stage two greedily accepts substitutions that reduce the
chemistry problem count. The composite reward blends swap efficiency,
fractional error reduction, and distance to full validity.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .chemcheck import detect_problems
from .molparse import MolGraph, parse
from .vocab import TokenPriors, Vocabulary


@dataclass(frozen=True)
class SwapRewardConfig:
    k_subst: int = 8
    lambda_swap: float = 0.20
    lambda_err: float = 0.50
    lambda_dist: float = 0.30
    e_max: int = 12

    def __post_init__(self):
        if self.k_subst < 1:
            raise ValueError("k_subst must be >= 1")
        if self.e_max < 1:
            raise ValueError("e_max must be >= 1")
        lams = (self.lambda_swap, self.lambda_err, self.lambda_dist)
        if any(l < 0 for l in lams):
            raise ValueError("negative reward weight")
        if abs(sum(lams) - 1.0) > 1e-12:
            raise ValueError(f"reward weights sum to {sum(lams)!r}, expected 1")


class Path(Enum):
    ValidDirect = "valid"
    RepairedFromInvalid = "repaired"
    Unrepairable = "unrepairable"


@dataclass(frozen=True)
class RewardBreakdown:
    f_swap: float
    f_err: float
    f_dist: float
    n_fail_stage1: int
    n_fail_stage2: int
    n_accepted: int  # accepted substitutions across both stages
    path: Path
    reward: float
    repaired_sequence: Optional[tuple[int, ...]]
    e0: int  # problem count seen by stage two (0 when nothing ever parsed)
    e_star: int


def sample_no_dup(
    v: Vocabulary, k: int, priors: TokenPriors, rng: np.random.Generator
) -> list[int]:
    """k distinct non-special token indices, drawn sequentially proportional
    to prior with removal."""
    idx = [i for i in range(len(v)) if priors.probs[i] > 0.0]
    if k > len(idx):
        raise ValueError(f"k={k} exceeds {len(idx)} positive-prior tokens")
    weights = [priors.probs[i] for i in idx]
    total = sum(weights)
    out: list[int] = []
    for _ in range(k):
        r = rng.random() * total
        acc = 0.0
        pick = len(idx) - 1
        for j, w in enumerate(weights):
            acc += w
            if r < acc:
                pick = j
                break
        out.append(idx[pick])
        total -= weights[pick]
        del idx[pick], weights[pick]
    return out


@dataclass
class StageTwoResult:
    n_fail: int
    f_err: float
    f_dist: float
    seq: list[int]
    n_accepted: int = 0
    e0: int = 0
    e_star: int = 0


def try_syntax_fix(
    seq: Sequence[int],
    v: Vocabulary,
    priors: TokenPriors,
    cfg: SwapRewardConfig,
    rng: np.random.Generator,
) -> tuple[Optional[list[int]], int]:
    """Visit positions in shuffled order, trying k_subst prior-weighted
    candidates at each; return the first sequence that parses. Candidates
    equal to the current token are skipped without counting; every failed
    candidate parse counts toward n_fail."""
    syms = [v.symbols[i] for i in seq]
    n_fail = 0
    for i in rng.permutation(len(seq)):
        for c in sample_no_dup(v, cfg.k_subst, priors, rng):
            if c == seq[i]:
                continue
            old = syms[i]
            syms[i] = v.symbols[c]
            if isinstance(parse(syms), MolGraph):
                fixed = list(seq)
                fixed[i] = c
                return fixed, n_fail
            syms[i] = old
            n_fail += 1
    return None, n_fail


def try_reduce_chem_problems(
    seq: Sequence[int],
    v: Vocabulary,
    priors: TokenPriors,
    cfg: SwapRewardConfig,
    rng: np.random.Generator,
) -> StageTwoResult:
    """One shuffled substitution pass accepting strict problem-count
    improvements; requires that seq parses."""
    g = parse([v.symbols[i] for i in seq])
    assert isinstance(g, MolGraph), "stage two requires a parseable sequence"
    e0 = detect_problems(g).count
    if e0 == 0:
        return StageTwoResult(0, 0.0, 1.0, list(seq), 0, 0, 0)

    best = list(seq)
    syms = [v.symbols[i] for i in best]
    e_star = e0
    n_fail = 0
    n_accepted = 0

    def result() -> StageTwoResult:
        f_err = (e0 - e_star) / max(1, e0)
        f_dist = 1.0 - min(e_star, cfg.e_max) / cfg.e_max
        return StageTwoResult(n_fail, f_err, f_dist, best, n_accepted, e0, e_star)

    for i in rng.permutation(len(best)):
        for c in sample_no_dup(v, cfg.k_subst, priors, rng):
            if c == best[i]:
                continue
            old = syms[i]
            syms[i] = v.symbols[c]
            g2 = parse(syms)
            if not isinstance(g2, MolGraph):
                syms[i] = old
                n_fail += 1
                continue
            e = detect_problems(g2).count
            if e < e_star:
                best[i] = c
                e_star = e
                n_accepted += 1
                if e_star == 0:
                    return result()
                break  # improvement accepted; move to the next position
            syms[i] = old
            n_fail += 1
    return result()


def reward(
    seq: Sequence[int],
    v: Vocabulary,
    priors: TokenPriors,
    cfg: SwapRewardConfig,
    rng: np.random.Generator,
) -> RewardBreakdown:
    """Score a completed episode's content tokens (EOS already stripped)."""
    if len(seq) == 0:
        return RewardBreakdown(
            1.0, 0.0, 0.0, 0, 0, 0, Path.Unrepairable, -1.0, None, 0, 0
        )
    g = parse([v.symbols[i] for i in seq])
    if isinstance(g, MolGraph):
        s2 = try_reduce_chem_problems(seq, v, priors, cfg, rng)
        f_swap = 1.0 / (1.0 + s2.n_fail)
        r = (
            cfg.lambda_swap * f_swap
            + cfg.lambda_err * s2.f_err
            + cfg.lambda_dist * s2.f_dist
        )
        return RewardBreakdown(
            f_swap,
            s2.f_err,
            s2.f_dist,
            0,
            s2.n_fail,
            s2.n_accepted,
            Path.ValidDirect,
            r,
            tuple(s2.seq),
            s2.e0,
            s2.e_star,
        )
    fixed, n1 = try_syntax_fix(seq, v, priors, cfg, rng)
    if fixed is None:
        return RewardBreakdown(
            1.0 / (1.0 + n1),
            0.0,
            0.0,
            n1,
            0,
            0,
            Path.Unrepairable,
            -1.0,
            None,
            0,
            0,
        )
    s2 = try_reduce_chem_problems(fixed, v, priors, cfg, rng)
    f_swap = 1.0 / (1.0 + n1 + s2.n_fail)
    r = (
        -0.5
        + cfg.lambda_swap * f_swap
        + cfg.lambda_err * s2.f_err
        + cfg.lambda_dist * s2.f_dist
    )
    return RewardBreakdown(
        f_swap,
        s2.f_err,
        s2.f_dist,
        n1,
        s2.n_fail,
        1 + s2.n_accepted,
        Path.RepairedFromInvalid,
        r,
        tuple(s2.seq),
        s2.e0,
        s2.e_star,
    )


def episode_rng(seed: int, episode: int) -> np.random.Generator:
    """Independent, reproducible stream for scoring one episode."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, episode])))
