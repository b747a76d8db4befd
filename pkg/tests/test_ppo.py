"""PPO math tests: returns, advantages, Gaussian head, losses, collection."""

import math

import numpy as np
import pytest
from scipy import stats

from scorpion_rl.env import EnvConfig, ScorpionEnv
from scorpion_rl.nets import flatten_params, forward, grad_check, init_mlp
from scorpion_rl.ppo import (
    ACTION_DIM,
    OBS_DIM,
    POLICY_SIZES,
    VALUE_SIZES,
    PpoConfig,
    TrajectoryBatch,
    collect,
    compute_returns,
    fill_advantages,
    fill_returns,
    gaussian_entropy,
    gaussian_log_prob,
    make_policy,
    make_value,
    ppo_loss,
    value_loss,
)


def returns_oracle(rewards, bootstrap, gamma):
    """Brute-force double sum: v_t = sum_i gamma^(i-t) r_i + gamma^(T-t) b."""
    n = len(rewards)
    out = np.empty(n)
    for t in range(n):
        acc = 0.0
        for i in range(t, n):
            acc += gamma ** (i - t) * rewards[i]
        out[t] = acc + gamma ** (n - t) * bootstrap
    return out


def literal_returns_oracle(rewards, bootstrap, gamma):
    """Episode-indexed discounting: v_t = sum_{i>=t} gamma^i r_i + gamma^(T-t) b."""
    n = len(rewards)
    out = np.empty(n)
    for t in range(n):
        acc = sum(gamma ** i * rewards[i] for i in range(t, n))
        out[t] = acc + gamma ** (n - t) * bootstrap
    return out


def test_compute_returns_matches_double_sum():
    rng = np.random.default_rng(0)
    for gamma in (0.5, 0.9, 0.99):
        for _ in range(30):
            n = int(rng.integers(1, 60))
            r = rng.normal(size=n)
            b = float(rng.normal())
            got = compute_returns(r, b, gamma)
            np.testing.assert_allclose(got, returns_oracle(r, b, gamma), atol=1e-10, rtol=0)


def test_compute_returns_recursion_identity():
    rng = np.random.default_rng(1)
    r = rng.normal(size=40)
    v = compute_returns(r, 0.25, 0.97)
    for t in range(39):
        assert v[t] == pytest.approx(r[t] + 0.97 * v[t + 1], abs=1e-12)
    assert v[39] == pytest.approx(r[39] + 0.97 * 0.25, abs=1e-12)


def test_compute_returns_episode_indexed_variant():
    rng = np.random.default_rng(2)
    r = rng.normal(size=25)
    got = compute_returns(r, 0.5, 0.9, episode_indexed=True)
    np.testing.assert_allclose(got, literal_returns_oracle(r, 0.5, 0.9), atol=1e-10, rtol=0)
    # at t=0 both variants agree; later steps differ by the gamma^t factor
    std = compute_returns(r, 0.5, 0.9)
    assert got[0] == pytest.approx(std[0], abs=1e-12)
    assert not np.allclose(got[1:], std[1:])


def test_compute_returns_validation():
    with pytest.raises(ValueError):
        compute_returns([1.0], 0.0, 0.0)
    with pytest.raises(ValueError):
        compute_returns([1.0], 0.0, 1.5)
    with pytest.raises(ValueError):
        compute_returns([], 0.0, 0.9)
    with pytest.raises(ValueError):
        compute_returns(np.ones((2, 2)), 0.0, 0.9)


def test_gamma_one_is_plain_sum():
    r = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(compute_returns(r, 4.0, 1.0), [10.0, 9.0, 7.0])


def test_gaussian_log_prob_matches_scipy():
    rng = np.random.default_rng(3)
    for _ in range(50):
        mean = rng.normal(size=ACTION_DIM)
        log_std = rng.uniform(-1.5, 0.5, size=ACTION_DIM)
        action = rng.normal(size=ACTION_DIM)
        want = stats.norm.logpdf(action, loc=mean, scale=np.exp(log_std)).sum()
        assert gaussian_log_prob(mean, log_std, action) == pytest.approx(want, abs=1e-12)


def test_gaussian_log_prob_batched():
    rng = np.random.default_rng(4)
    mean = rng.normal(size=(10, 3))
    log_std = rng.uniform(-1, 0, size=3)
    action = rng.normal(size=(10, 3))
    got = gaussian_log_prob(mean, log_std, action)
    assert got.shape == (10,)
    for i in range(10):
        assert got[i] == pytest.approx(
            stats.norm.logpdf(action[i], mean[i], np.exp(log_std)).sum(), abs=1e-12)


def test_gaussian_entropy_matches_scipy():
    rng = np.random.default_rng(5)
    log_std = rng.uniform(-2, 1, size=3)
    want = sum(stats.norm(scale=s).entropy() for s in np.exp(log_std))
    assert gaussian_entropy(log_std) == pytest.approx(want, abs=1e-12)


def test_default_network_shapes():
    policy = make_policy(0)
    value = make_value(0)
    assert policy.sizes == POLICY_SIZES == (5, 128, 64, 3)
    assert value.sizes == VALUE_SIZES == (5, 128, 64, 1)
    np.testing.assert_allclose(policy.log_std, math.log(0.5))
    assert value.log_std is None


def test_ppo_config_validation():
    with pytest.raises(ValueError):
        PpoConfig(gamma=0.0)
    with pytest.raises(ValueError):
        PpoConfig(lr=-1.0)
    with pytest.raises(ValueError):
        PpoConfig(clip_eps=0.0)
    with pytest.raises(ValueError):
        PpoConfig(batch_episodes=0)
    with pytest.raises(ValueError):
        PpoConfig(policy_updates=0)
    with pytest.raises(ValueError):
        PpoConfig(seed=-1)
    with pytest.raises(ValueError):
        PpoConfig(optimizer="rmsprop")


def small_cfg(**kw):
    base = dict(horizon=20, batch_episodes=3, epochs=5)
    base.update(kw)
    return PpoConfig(**base)


def make_batch(cfg, policy_seed=0, value_seed=1, iteration=1):
    policy = make_policy(policy_seed)
    value = make_value(value_seed)
    env_cfg = EnvConfig(dt=cfg.dt, horizon=cfg.horizon)
    batch = collect(lambda: ScorpionEnv(env_cfg), policy, value, cfg, iteration=iteration)
    return batch, policy, value


def test_collect_shapes_and_bookkeeping():
    cfg = small_cfg()
    batch, policy, value = make_batch(cfg)
    n = cfg.batch_episodes * cfg.horizon
    assert batch.obs.shape == (n, OBS_DIM)
    assert batch.actions.shape == (n, ACTION_DIM)
    assert batch.log_probs.shape == (n,)
    assert batch.rewards.shape == (n,)
    assert batch.value_preds.shape == (n,)
    assert batch.ep_lengths.tolist() == [cfg.horizon] * cfg.batch_episodes
    assert batch.final_obs.shape == (cfg.batch_episodes, OBS_DIM)
    slices = batch.episode_slices()
    assert [s.start for s in slices] == [0, 20, 40]
    for i, sl in enumerate(slices):
        assert batch.ep_returns[i] == pytest.approx(batch.rewards[sl].sum())


def test_collect_is_deterministic_per_iteration():
    cfg = small_cfg()
    a, _, _ = make_batch(cfg, iteration=3)
    b, _, _ = make_batch(cfg, iteration=3)
    c, _, _ = make_batch(cfg, iteration=4)
    np.testing.assert_array_equal(a.obs, b.obs)
    np.testing.assert_array_equal(a.actions, b.actions)
    np.testing.assert_array_equal(a.rewards, b.rewards)
    assert not np.array_equal(a.actions, c.actions)


def test_collect_log_probs_and_values_are_recomputable():
    cfg = small_cfg()
    batch, policy, value = make_batch(cfg)
    means, _ = forward(policy, batch.obs)
    np.testing.assert_array_equal(
        batch.log_probs, gaussian_log_prob(means, policy.log_std, batch.actions))
    np.testing.assert_array_equal(batch.value_preds, forward(value, batch.obs)[0][:, 0])
    np.testing.assert_array_equal(batch.bootstraps, forward(value, batch.final_obs)[0][:, 0])


def test_collect_matches_sequential_rollout():
    """Lockstep batching reproduces sequential episodes to round-off.

    Bit-exactness is not expected: a batched matrix product may order its
    sums differently from a single-row product.
    """
    cfg = small_cfg(batch_episodes=4)
    batch, policy, value = make_batch(cfg, iteration=7)
    env_cfg = EnvConfig(dt=cfg.dt, horizon=cfg.horizon)
    std = np.exp(policy.log_std)
    for e, sl in enumerate(batch.episode_slices()):
        root = np.random.SeedSequence(cfg.seed, spawn_key=(7, e))
        env_seq, noise_seq = root.spawn(2)
        env = ScorpionEnv(env_cfg)
        obs = env.reset(int(env_seq.generate_state(1, np.uint64)[0]))
        rng = np.random.default_rng(noise_seq)
        for t in range(cfg.horizon):
            mean, _ = forward(policy, obs)
            act = mean + std * rng.standard_normal(ACTION_DIM)
            np.testing.assert_allclose(batch.obs[sl][t], obs, rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(batch.actions[sl][t], act, rtol=1e-9, atol=1e-12)
            obs, rew, _, _ = env.step(batch.actions[sl][t])
            assert batch.rewards[sl][t] == pytest.approx(rew, abs=1e-12)


def test_fill_returns_per_episode():
    cfg = small_cfg()
    batch, _, _ = make_batch(cfg)
    fill_returns(batch, 0.9)
    for i, sl in enumerate(batch.episode_slices()):
        np.testing.assert_allclose(
            batch.returns[sl],
            returns_oracle(batch.rewards[sl], float(batch.bootstraps[i]), 0.9),
            atol=1e-10)


def test_fill_advantages_normalized():
    cfg = small_cfg()
    batch, _, _ = make_batch(cfg)
    fill_returns(batch, 0.99)
    fill_advantages(batch)
    raw = batch.returns - batch.value_preds
    want = (raw - raw.mean()) / max(float(raw.std()), 1e-8)
    np.testing.assert_allclose(batch.advantages, want, atol=1e-12)
    assert batch.advantages.mean() == pytest.approx(0.0, abs=1e-12)
    assert batch.advantages.std() == pytest.approx(1.0, abs=1e-9)


def test_fill_advantages_requires_returns():
    batch, _, _ = make_batch(small_cfg())
    with pytest.raises(ValueError):
        fill_advantages(batch)


def test_first_update_ratios_are_exactly_one():
    cfg = small_cfg()
    batch, policy, _ = make_batch(cfg)
    fill_returns(batch, cfg.gamma)
    fill_advantages(batch)
    loss, grads, info = ppo_loss(batch, policy, cfg)
    assert info["mean_ratio"] == 1.0
    assert info["mean_abs_ratio_dev"] == 0.0
    assert info["clip_fraction"] == 0.0


def test_ppo_loss_value_against_direct_formula():
    rng = np.random.default_rng(8)
    cfg = PpoConfig()
    policy = make_policy(2)
    n = 64
    batch = TrajectoryBatch(
        obs=rng.uniform(-1, 1, size=(n, OBS_DIM)),
        actions=rng.normal(0, 0.6, size=(n, ACTION_DIM)),
        log_probs=rng.normal(-3, 0.4, size=n),
        rewards=np.zeros(n), value_preds=np.zeros(n),
        ep_lengths=np.array([n]), bootstraps=np.zeros(1), ep_returns=np.zeros(1),
        final_obs=np.zeros((1, OBS_DIM)),
        returns=np.zeros(n), advantages=rng.normal(size=n))
    loss, _, info = ppo_loss(batch, policy, cfg)
    mean, _ = forward(policy, batch.obs)
    lp = gaussian_log_prob(mean, policy.log_std, batch.actions)
    ratio = np.exp(lp - batch.log_probs)
    clipped = np.clip(ratio, 0.8, 1.2) * batch.advantages
    want = -np.minimum(ratio * batch.advantages, clipped).mean() \
        - cfg.entropy_coef * gaussian_entropy(policy.log_std)
    assert loss == pytest.approx(want, abs=1e-12)
    assert 0.0 < info["clip_fraction"] < 1.0


def test_ppo_loss_gradients_pass_finite_difference():
    rng = np.random.default_rng(9)
    cfg = PpoConfig()
    policy = make_policy(11)
    n = 48
    obs = rng.uniform(-1, 1, size=(n, OBS_DIM))
    actions = rng.normal(0, 0.7, size=(n, ACTION_DIM))
    mean0, _ = forward(policy, obs)
    behavior = gaussian_log_prob(mean0, policy.log_std, actions) \
        + rng.uniform(-0.1, 0.1, size=n)
    batch = TrajectoryBatch(
        obs=obs, actions=actions, log_probs=behavior,
        rewards=np.zeros(n), value_preds=np.zeros(n),
        ep_lengths=np.array([n]), bootstraps=np.zeros(1), ep_returns=np.zeros(1),
        final_obs=np.zeros((1, OBS_DIM)),
        returns=np.zeros(n), advantages=rng.normal(size=n))
    err = grad_check(policy, lambda p: ppo_loss(batch, p, cfg)[:2], n_probes=250, seed=3)
    assert err < 1e-4


def test_value_loss_and_gradients():
    cfg = small_cfg()
    batch, _, value = make_batch(cfg)
    fill_returns(batch, cfg.gamma)
    loss, grads = value_loss(batch, value)
    pred, _ = forward(value, batch.obs)
    assert loss == pytest.approx(float(np.mean((pred[:, 0] - batch.returns) ** 2)), abs=1e-12)
    err = grad_check(value, lambda v: value_loss(batch, v), n_probes=250, seed=4)
    assert err < 1e-4


def test_losses_require_filled_batch():
    cfg = small_cfg()
    batch, policy, value = make_batch(cfg)
    with pytest.raises(ValueError):
        ppo_loss(batch, policy, cfg)
    with pytest.raises(ValueError):
        value_loss(batch, value)


def test_entropy_gradient_direction():
    """With zero advantages the only force on log_std is the entropy bonus."""
    cfg = small_cfg()
    batch, policy, _ = make_batch(cfg)
    fill_returns(batch, cfg.gamma)
    batch.advantages = np.zeros_like(batch.returns)
    _, grads, _ = ppo_loss(batch, policy, cfg)
    np.testing.assert_allclose(grads.log_std, -cfg.entropy_coef, atol=1e-15)
