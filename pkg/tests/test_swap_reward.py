import numpy as np
import pytest
from scipy import stats

from swaprl.molparse import MolGraph, parse
from swaprl.swap_reward import (Path, RewardBreakdown, SwapRewardConfig, episode_rng,
                                reward, sample_no_dup, try_reduce_chem_problems,
                                try_syntax_fix)
from swaprl.vocab import TokenPriors, build_vocabulary, compute_priors


@pytest.fixture(scope="module")
def small():
    """Six-token vocabulary with uniform-ish priors."""
    lines = ["C1CC1", "C=C", "CO", "C(C)O"]
    v = build_vocabulary(lines)
    p = compute_priors(lines, v)
    return v, p


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


def test_config_validates_weights():
    with pytest.raises(ValueError):
        SwapRewardConfig(lambda_swap=0.5, lambda_err=0.5, lambda_dist=0.5)
    with pytest.raises(ValueError):
        SwapRewardConfig(k_subst=0)


def test_sample_no_dup_full_set(small):
    v, p = small
    positives = [i for i in range(len(v)) if p.probs[i] > 0]
    got = sample_no_dup(v, len(positives), p, rng())
    assert sorted(got) == sorted(positives)


def test_sample_no_dup_rejects_oversize(small):
    v, p = small
    positives = sum(1 for i in range(len(v)) if p.probs[i] > 0)
    with pytest.raises(ValueError):
        sample_no_dup(v, positives + 1, p, rng())


def test_sample_no_dup_matches_priors_chi_square(vocab, priors):
    r = rng(2)
    n = 100_000
    counts = np.zeros(len(vocab))
    for _ in range(n):
        (idx,) = sample_no_dup(vocab, 1, priors, r)
        counts[idx] += 1
    expected = np.array([priors.probs[i] * n for i in range(len(vocab))])
    keep = expected > 0
    assert counts[~keep].sum() == 0  # zero-prior tokens never appear
    chi2, p_value = stats.chisquare(counts[keep], expected[keep])
    assert p_value > 0.01  # within the 99% bound


def test_syntax_fix_single_substitution(small):
    v, p = small
    cfg = SwapRewardConfig(k_subst=sum(1 for i in range(len(v)) if p.probs[i] > 0))
    seq = v.tokenize("C(C")
    fixed, n_fail = try_syntax_fix(seq, v, p, cfg, rng(3))
    assert fixed is not None
    assert isinstance(parse([v.symbols[i] for i in fixed]), MolGraph)
    assert sum(a != b for a, b in zip(seq, fixed)) == 1
    assert n_fail >= 0


def test_syntax_fix_impossible(small):
    v, p = small
    cfg = SwapRewardConfig(k_subst=sum(1 for i in range(len(v)) if p.probs[i] > 0))
    seq = v.tokenize("((((((")
    fixed, n_fail = try_syntax_fix(seq, v, p, cfg, rng(4))
    assert fixed is None
    assert n_fail > 0


def test_stage_two_clean_input_short_circuits(vocab, priors):
    cfg = SwapRewardConfig()
    seq = vocab.tokenize("CCO")
    res = try_reduce_chem_problems(seq, vocab, priors, cfg, rng(5))
    assert (res.n_fail, res.f_err, res.f_dist) == (0, 0.0, 1.0)
    assert res.seq == seq


def test_stage_two_reduces_problems(vocab, priors):
    # "cc" has two problems; with a big budget the pass can fix at least one
    cfg = SwapRewardConfig(k_subst=20)
    seq = vocab.tokenize("cc")
    res = try_reduce_chem_problems(seq, vocab, priors, cfg, rng(6))
    assert res.e0 == 2
    assert res.e_star <= res.e0
    assert res.f_err == (res.e0 - res.e_star) / max(1, res.e0)
    assert res.f_dist == 1.0 - min(res.e_star, cfg.e_max) / cfg.e_max


def test_stage_two_outcome_values(vocab, priors):
    """Frozen seeds drive "cc" (two problems) to each residual count with a
    one-candidate budget; the returned fractions follow the definitions."""
    cfg = SwapRewardConfig(k_subst=1)
    seq = vocab.tokenize("cc")
    expected = {
        0: (2, 0.0, 1.0 - 2 / 12, 0),   # nothing improved
        4: (1, 0.5, 1.0 - 1 / 12, 1),   # one of two fixed
        11: (0, 1.0, 1.0, 2),           # fully repaired
    }
    for seed, (e_star, f_err, f_dist, n_acc) in expected.items():
        res = try_reduce_chem_problems(seq, vocab, priors, cfg, rng(seed))
        assert res.e0 == 2
        assert res.e_star == e_star
        assert res.f_err == pytest.approx(f_err, abs=1e-15)
        assert res.f_dist == pytest.approx(f_dist, abs=1e-15)
        assert res.n_accepted == n_acc


def test_reward_pristine_molecule(vocab, priors):
    cfg = SwapRewardConfig()
    b = reward(vocab.tokenize("CCO"), vocab, priors, cfg, rng(7))
    assert b.path is Path.ValidDirect
    assert b.reward == pytest.approx(0.5, abs=0)
    assert (b.f_swap, b.f_err, b.f_dist) == (1.0, 0.0, 1.0)
    assert b.n_accepted == 0


def test_reward_empty_sequence(vocab, priors):
    b = reward([], vocab, priors, SwapRewardConfig(), rng(8))
    assert b.path is Path.Unrepairable
    assert b.reward == -1.0


def test_reward_unrepairable_is_minus_one(vocab, priors):
    seq = vocab.tokenize("((((((")
    b = reward(seq, vocab, priors, SwapRewardConfig(), rng(9))
    assert b.path is Path.Unrepairable
    assert b.reward == -1.0


def _expected_reward(b: RewardBreakdown, cfg: SwapRewardConfig) -> float:
    if b.path is Path.Unrepairable:
        return -1.0
    base = (
        cfg.lambda_swap * b.f_swap
        + cfg.lambda_err * b.f_err
        + cfg.lambda_dist * b.f_dist
    )
    if b.path is Path.RepairedFromInvalid:
        return -0.5 + base
    return base


def test_reward_formula_identity_over_random_sequences(vocab, priors):
    cfg = SwapRewardConfig()
    r = rng(10)
    content = [i for i in range(len(vocab)) if priors.probs[i] > 0]
    paths = set()
    for trial in range(400):
        n = int(r.integers(1, 30))
        seq = [content[int(r.integers(len(content)))] for _ in range(n)]
        b = reward(seq, vocab, priors, cfg, episode_rng(99, trial))
        paths.add(b.path)
        assert -1.0 <= b.reward <= 1.0
        assert b.reward == pytest.approx(_expected_reward(b, cfg), abs=1e-15)
        assert 0.0 < b.f_swap <= 1.0
        assert 0.0 <= b.f_err <= 1.0
        assert 0.0 <= b.f_dist <= 1.0
        assert b.e_star <= b.e0
        if b.path is Path.RepairedFromInvalid:
            assert -0.5 < b.reward <= 0.5
    assert paths == {Path.ValidDirect, Path.RepairedFromInvalid, Path.Unrepairable}


def test_reward_deterministic_given_stream(vocab, priors):
    cfg = SwapRewardConfig()
    seq = vocab.tokenize("c1ccccc1") + vocab.tokenize("(")
    a = reward(seq, vocab, priors, cfg, episode_rng(5, 1))
    b = reward(seq, vocab, priors, cfg, episode_rng(5, 1))
    assert a == b


def test_repaired_sequence_parses(vocab, priors):
    cfg = SwapRewardConfig(k_subst=12)
    seq = vocab.tokenize("C(C")
    b = reward(seq, vocab, priors, cfg, episode_rng(6, 0))
    if b.path is Path.RepairedFromInvalid:
        g = parse([vocab.symbols[i] for i in b.repaired_sequence])
        assert isinstance(g, MolGraph)


def test_f_swap_monotone_in_failures():
    vals = [1.0 / (1.0 + n) for n in range(0, 50)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_f_dist_monotone_in_residual_errors():
    cfg = SwapRewardConfig()
    vals = [1.0 - min(e, cfg.e_max) / cfg.e_max for e in range(0, 20)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert min(vals) == 0.0  # clamped at e_max


def test_stage_one_skips_identical_candidate(small):
    """A lone "(" is always fixable by swapping to an atom; the "(" candidate
    itself is skipped without counting, so n_fail stays below the budget."""
    v, p = small
    cfg = SwapRewardConfig(k_subst=sum(1 for i in range(len(v)) if p.probs[i] > 0))
    fixed, n_fail = try_syntax_fix(v.tokenize("("), v, p, cfg, rng(12))
    assert fixed is not None
    assert n_fail <= cfg.k_subst - 2
