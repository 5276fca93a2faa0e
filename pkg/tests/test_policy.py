import numpy as np
import pytest
import torch

from swaprl.policy import (GruActor, GruCritic, gradients, logprob_entropy,
                           named_params, param_count, sample_sequence)

V, H, L = 8, 16, 2


@pytest.fixture()
def actor():
    return GruActor(V, H, L, init_seed=3)


@pytest.fixture()
def critic():
    return GruCritic(V, H, L, init_seed=4)


def zeroed(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


def test_softmax_normalized(actor):
    with torch.no_grad():
        logits, _ = actor.step(torch.tensor([0]), actor.init_hidden(1))
    probs = torch.softmax(logits, -1)
    assert float(probs.sum()) == pytest.approx(1.0, abs=1e-6)


def test_zero_weights_uniform(actor):
    zeroed(actor)
    logits, _ = actor.step(torch.tensor([2]), actor.init_hidden(1))
    assert torch.allclose(torch.softmax(logits[0], -1), torch.full((V,), 1 / V))


def test_hidden_state_updates(actor):
    h0 = actor.init_hidden(1)
    _, h1 = actor.step(torch.tensor([2]), h0)
    assert not torch.allclose(h0, h1)


def test_out_of_range_token_rejected(actor):
    with pytest.raises(ValueError):
        actor.step(torch.tensor([V]), actor.init_hidden(1))


def test_sample_respects_cap(actor):
    gen = torch.Generator().manual_seed(0)
    for _ in range(50):
        seq, lps, ents = sample_sequence(actor, bos=0, eos=1, rng=gen, t_max=60)
        assert len(seq) <= 60
        assert seq[0] == 0
        assert len(lps) == len(seq) - 1
        if seq[-1] != 1:
            assert len(seq) == 60


def test_sample_deterministic(actor):
    a = sample_sequence(actor, 0, 1, torch.Generator().manual_seed(9))
    b = sample_sequence(actor, 0, 1, torch.Generator().manual_seed(9))
    assert a == b


def test_sample_matches_softmax_frequencies(actor):
    """Single-step multinomial draws track the softmax within chi-square."""
    from scipy import stats

    with torch.no_grad():
        logits, _ = actor.step(torch.tensor([0]), actor.init_hidden(1))
        probs = torch.softmax(logits[0], -1)
    gen = torch.Generator().manual_seed(5)
    n = 100_000
    draws = torch.multinomial(probs.expand(n, V), 1, generator=gen).squeeze(-1)
    counts = torch.bincount(draws, minlength=V).double()
    chi2, p_value = stats.chisquare(counts.numpy(), (probs * n).numpy())
    assert p_value > 0.01


def test_uniform_policy_logprob_entropy(actor):
    zeroed(actor)
    lp, ent = logprob_entropy(actor, [0, 3, 4, 1])
    assert torch.allclose(lp, torch.full((3,), -np.log(V)), atol=1e-6)
    assert torch.allclose(ent, torch.full((3,), np.log(V)), atol=1e-6)


def test_entropy_nonnegative(actor):
    _, ent = logprob_entropy(actor, [0, 2, 3, 5, 1])
    assert bool((ent >= 0).all())


def test_rescoring_matches_sampling(actor):
    gen = torch.Generator().manual_seed(11)
    seq, lps, _ = sample_sequence(actor, 0, 1, gen)
    lp, _ = logprob_entropy(actor, seq)
    assert np.max(np.abs(np.array(lps) - lp.detach().numpy())) < 1e-6


def test_float64_float32_agree():
    a32 = GruActor(V, H, L, init_seed=7)
    a64 = GruActor(V, H, L, init_seed=7).double()
    with torch.no_grad():
        for p64, p32 in zip(a64.parameters(), a32.parameters()):
            p64.copy_(p32.double())
    seq = [0, 2, 5, 3]
    with torch.no_grad():
        l32 = a32.sequence_logits(torch.tensor([seq]))
        l64 = a64.sequence_logits(torch.tensor([seq]))
    rel = float(((l32.double() - l64).abs() / (l64.abs() + 1e-9)).max())
    assert rel < 1e-3


def test_critic_zero_weights_value_zero(critic):
    zeroed(critic)
    with torch.no_grad():
        assert float(critic.value(torch.tensor([0, 2, 5]))) == 0.0


def test_critic_pure_function(critic):
    prefix = torch.tensor([0, 3, 3, 4])
    with torch.no_grad():
        assert float(critic.value(prefix)) == float(critic.value(prefix))


def test_critic_finite_on_random_prefixes(critic):
    rng = np.random.default_rng(0)
    with torch.no_grad():
        for _ in range(1000):
            n = int(rng.integers(1, 20))
            prefix = torch.tensor([0] + rng.integers(0, V, n).tolist())
            assert np.isfinite(float(critic.value(prefix)))


def test_gradients_nonfinite_loss_rejected(actor):
    with pytest.raises(ValueError):
        gradients(torch.tensor(float("nan")), {"actor": actor})


def test_entropy_gradient_zero_at_uniform(actor):
    zeroed(actor)
    logits, _ = actor.step(torch.tensor([0]), actor.init_hidden(1))
    logp = torch.log_softmax(logits[0], -1)
    entropy = -(torch.exp(logp) * logp).sum()
    grads = gradients(entropy, {"actor": actor})
    total = max(float(g.abs().max()) for g in grads.values())
    assert total < 1e-9


def test_param_count_matches_formula(actor):
    d_e = 2 * V
    gru = 3 * H * (d_e + H) + 6 * H + 3 * H * (H + H) + 6 * H
    head = 2 * H * V + V
    assert param_count(actor) == V * d_e + gru + head


def test_named_params_prefixing(actor):
    names = set(named_params(actor, "actor"))
    assert "actor/backbone.embedding" in names
    assert any(n.startswith("actor/head") for n in names)


def test_wide_head_dimensions():
    wide = GruActor(V, H, L, init_seed=3, wide_head=True)
    narrow = GruActor(V, H, L, init_seed=3)
    assert wide.head.in_features == H * (1 + L)
    assert narrow.head.in_features == 2 * H
    logits, h = wide.step(torch.tensor([0]), wide.init_hidden(1))
    assert logits.shape == (1, V)
    lp, ent = logprob_entropy(wide, [0, 2, 3, 1])
    assert lp.shape == (3,)
