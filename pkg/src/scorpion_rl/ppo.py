"""PPO with Monte-Carlo returns for the waypoint-tracking task.

The policy is a diagonal Gaussian whose mean comes from a (5, 128, 64, 3)
tanh network and whose log standard deviations are free parameters shared
across states; the value baseline is a separate (5, 128, 64, 1) network.
Returns are full discounted reward sums with a value bootstrap at the
horizon, advantages are batch-normalized, and the policy improves through
the clipped probability-ratio surrogate with a small entropy bonus.

Gradients for both losses are assembled here in closed form on top of
``nets.backward``; ``nets.grad_check`` validates the whole path in the
tests.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .env import ScorpionEnv
from .nets import Mlp, backward, forward, init_mlp

OBS_DIM = 5
ACTION_DIM = 3
HIDDEN_SIZES = (128, 64)
POLICY_SIZES = (OBS_DIM,) + HIDDEN_SIZES + (ACTION_DIM,)
VALUE_SIZES = (OBS_DIM,) + HIDDEN_SIZES + (1,)

_LOG2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PpoConfig:
    """Training hyperparameters.

    ``horizon``/``dt`` override the environment's episode timing during
    training; ``value_updates`` is the number of baseline regression steps
    per iteration; ``policy_updates`` is the number of clipped-surrogate
    passes over each collected batch; ``batch_episodes`` episodes are
    collected per iteration. ``optimizer`` is "adam" or "sgd" and
    ``episode_indexed_returns`` switches the return estimator to the
    episode-indexed discounting variant.
    """

    gamma: float = 0.99
    lr: float = 1e-3
    entropy_coef: float = 5e-4
    epochs: int = 1500
    horizon: int = 500
    dt: float = 0.1
    clip_eps: float = 0.2
    value_updates: int = 40
    policy_updates: int = 10
    batch_episodes: int = 16
    seed: int = 0
    optimizer: str = "adam"
    episode_indexed_returns: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"ppo.gamma must be in (0, 1], got {self.gamma}")
        if not self.lr > 0:
            raise ValueError(f"ppo.lr must be > 0, got {self.lr}")
        if self.entropy_coef < 0:
            raise ValueError(f"ppo.entropy_coef must be >= 0, got {self.entropy_coef}")
        if not self.clip_eps > 0:
            raise ValueError(f"ppo.clip_eps must be > 0, got {self.clip_eps}")
        if not self.dt > 0:
            raise ValueError(f"ppo.dt must be > 0, got {self.dt}")
        for name in ("epochs", "horizon", "value_updates", "policy_updates",
                     "batch_episodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"ppo.{name} must be >= 1, got {getattr(self, name)}")
        if self.seed < 0:
            raise ValueError(f"ppo.seed must be >= 0, got {self.seed}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"ppo.optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")


def make_policy(seed: int) -> Mlp:
    """Gaussian policy net; log stds start at ln(0.5) in every dimension."""
    return init_mlp(POLICY_SIZES, seed=seed, log_std_dim=ACTION_DIM)


def make_value(seed: int) -> Mlp:
    return init_mlp(VALUE_SIZES, seed=seed)


def gaussian_log_prob(mean, log_std, action) -> np.ndarray:
    """Log density of a diagonal Gaussian, summed over the last axis."""
    mean = np.asarray(mean, dtype=float)
    action = np.asarray(action, dtype=float)
    log_std = np.asarray(log_std, dtype=float)
    z = (action - mean) * np.exp(-log_std)
    per_dim = -0.5 * z * z - log_std - 0.5 * _LOG2PI
    return per_dim.sum(axis=-1)


def gaussian_entropy(log_std) -> float:
    """Exact differential entropy of the diagonal Gaussian head."""
    log_std = np.asarray(log_std, dtype=float)
    return float(log_std.sum() + 0.5 * log_std.size * (1.0 + _LOG2PI))


def compute_returns(rewards, bootstrap: float, gamma: float,
                    episode_indexed: bool = False) -> np.ndarray:
    """Discounted return-to-go for every step of one episode.

    Standard mode satisfies v_t = r_t + gamma * v_{t+1} with
    v_T = ``bootstrap``. The episode-indexed variant keeps the horizon
    bootstrap term gamma^(T-t) * bootstrap but discounts each reward by its
    absolute episode index, v_t = sum_{i>=t} gamma^i r_i, so the weight of
    a reward depends on when it happens in the episode rather than on its
    offset from t.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    r = np.asarray(rewards, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("rewards must be a non-empty 1-D sequence")
    n = r.size
    out = np.empty(n)
    if episode_indexed:
        weighted = r * gamma ** np.arange(n)
        acc = 0.0
        for t in range(n - 1, -1, -1):
            acc += weighted[t]
            out[t] = acc + gamma ** (n - t) * bootstrap
    else:
        acc = float(bootstrap)
        for t in range(n - 1, -1, -1):
            acc = r[t] + gamma * acc
            out[t] = acc
    return out


@dataclass
class TrajectoryBatch:
    """Flattened on-policy batch; episodes are stored back to back."""

    obs: np.ndarray           # (n, OBS_DIM)
    actions: np.ndarray       # (n, ACTION_DIM), pre-clamp samples
    log_probs: np.ndarray     # (n,) behavior log-densities
    rewards: np.ndarray       # (n,)
    value_preds: np.ndarray   # (n,)
    ep_lengths: np.ndarray    # (episodes,)
    bootstraps: np.ndarray    # (episodes,) value at each final state
    ep_returns: np.ndarray    # (episodes,) undiscounted reward sums
    final_obs: np.ndarray     # (episodes, OBS_DIM)
    returns: Optional[np.ndarray] = None
    advantages: Optional[np.ndarray] = None

    def episode_slices(self) -> List[slice]:
        ends = np.cumsum(self.ep_lengths)
        starts = ends - self.ep_lengths
        return [slice(int(a), int(b)) for a, b in zip(starts, ends)]


def collect(env_factory: Callable[[], ScorpionEnv], policy: Mlp, value: Mlp,
            cfg: PpoConfig, iteration: int = 0) -> TrajectoryBatch:
    """Roll out ``batch_episodes`` full-horizon episodes under the policy.

    Episodes run in lockstep so the policy mean is evaluated as one batched
    forward per step; results agree with a sequential rollout to floating
    point round-off. Every stochastic draw comes from a SeedSequence spawned off
    (cfg.seed, iteration, episode), so a (config, iteration) pair fixes the
    batch bit for bit. Behavior log-probs and value predictions are
    recomputed in single batched passes at the end, which makes the first
    surrogate evaluation see probability ratios of exactly 1.
    """
    n_ep, horizon = cfg.batch_episodes, cfg.horizon
    envs = [env_factory() for _ in range(n_ep)]
    noise = []
    obs_now = np.empty((n_ep, OBS_DIM))
    for e in range(n_ep):
        root = np.random.SeedSequence(cfg.seed, spawn_key=(iteration, e))
        env_seq, noise_seq = root.spawn(2)
        obs_now[e] = envs[e].reset(int(env_seq.generate_state(1, np.uint64)[0]))
        noise.append(np.random.default_rng(noise_seq))
    std = np.exp(policy.log_std)
    obs_buf = np.empty((n_ep, horizon, OBS_DIM))
    act_buf = np.empty((n_ep, horizon, ACTION_DIM))
    rew_buf = np.empty((n_ep, horizon))
    for t in range(horizon):
        means, _ = forward(policy, obs_now)
        if not np.isfinite(means).all():
            raise ValueError("non-finite policy output during rollout")
        obs_buf[:, t] = obs_now
        for e in range(n_ep):
            a = means[e] + std * noise[e].standard_normal(ACTION_DIM)
            act_buf[e, t] = a
            obs_e, r, _, _ = envs[e].step(a)
            obs_now[e] = obs_e
            rew_buf[e, t] = r
    final_obs = obs_now.copy()
    obs_flat = obs_buf.reshape(n_ep * horizon, OBS_DIM)
    act_flat = act_buf.reshape(n_ep * horizon, ACTION_DIM)
    means_flat, _ = forward(policy, obs_flat)
    log_probs = gaussian_log_prob(means_flat, policy.log_std, act_flat)
    value_preds = forward(value, obs_flat)[0][:, 0]
    bootstraps = forward(value, final_obs)[0][:, 0]
    return TrajectoryBatch(
        obs=obs_flat,
        actions=act_flat,
        log_probs=log_probs,
        rewards=rew_buf.reshape(-1),
        value_preds=value_preds,
        ep_lengths=np.full(n_ep, horizon, dtype=int),
        bootstraps=bootstraps,
        ep_returns=rew_buf.sum(axis=1),
        final_obs=final_obs,
    )


def fill_returns(batch: TrajectoryBatch, gamma: float, episode_indexed: bool = False) -> None:
    """Compute per-step returns for every episode in the batch."""
    out = np.empty(batch.rewards.size)
    for i, sl in enumerate(batch.episode_slices()):
        out[sl] = compute_returns(batch.rewards[sl], float(batch.bootstraps[i]),
                                  gamma, episode_indexed=episode_indexed)
    batch.returns = out


def fill_advantages(batch: TrajectoryBatch) -> None:
    """Advantage = return - value prediction, normalized across the batch.

    Normalization divides by the population std with a 1e-8 floor and is
    skipped for single-sample batches where the std is meaningless.
    """
    if batch.returns is None:
        raise ValueError("returns must be computed before advantages")
    adv = batch.returns - batch.value_preds
    if adv.size > 1:
        adv = (adv - adv.mean()) / max(float(adv.std()), 1e-8)
    batch.advantages = adv


def ppo_loss(batch: TrajectoryBatch, policy: Mlp, cfg: PpoConfig) -> Tuple[float, Mlp, dict]:
    """Clipped-surrogate policy loss, its parameter gradients and diagnostics.

    loss = -mean_i min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i)
           - entropy_coef * entropy(pi)
    with rho_i the ratio of current to behavior action density. Gradients
    flow through the unclipped branch wherever it attains the min (the two
    branches agree at the tie), and the entropy term only moves log_std.
    """
    if batch.advantages is None:
        raise ValueError("advantages must be computed before the policy loss")
    mean, cache = forward(policy, batch.obs)
    log_std = policy.log_std
    inv_var = np.exp(-2.0 * log_std)
    diff = batch.actions - mean
    z2 = (diff * diff) * inv_var
    # same expression as the behavior log-probs, so unchanged parameters
    # give ratios of exactly 1
    log_prob = gaussian_log_prob(mean, log_std, batch.actions)
    ratio = np.exp(log_prob - batch.log_probs)
    if not np.isfinite(ratio).all():
        raise ValueError("non-finite probability ratio")
    adv = batch.advantages
    surr = ratio * adv
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv
    objective = np.minimum(surr, clipped)
    entropy = gaussian_entropy(log_std)
    n = ratio.size
    loss = -float(objective.mean()) - cfg.entropy_coef * entropy

    # d loss / d log_prob_i, nonzero only where the unclipped branch wins
    active = surr <= clipped
    d_logp = np.where(active, ratio * adv, 0.0) * (-1.0 / n)
    d_mean = d_logp[:, None] * diff * inv_var
    grads = backward(policy, cache, d_mean)
    grads.log_std = (d_logp[:, None] * (z2 - 1.0)).sum(axis=0) - cfg.entropy_coef
    info = {
        "entropy": entropy,
        "mean_ratio": float(ratio.mean()),
        "mean_abs_ratio_dev": float(np.abs(ratio - 1.0).mean()),
        "clip_fraction": float(np.mean(~active)),
    }
    return loss, grads, info


def value_loss(batch: TrajectoryBatch, value: Mlp) -> Tuple[float, Mlp]:
    """Mean squared error of the baseline against the returns, with grads."""
    if batch.returns is None:
        raise ValueError("returns must be computed before the value loss")
    pred, cache = forward(value, batch.obs)
    err = pred[:, 0] - batch.returns
    loss = float(np.mean(err * err))
    grads = backward(value, cache, (2.0 / err.size) * err[:, None])
    return loss, grads
