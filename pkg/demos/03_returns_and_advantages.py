"""Returns, bootstraps and normalized advantages on real rollouts.

Collects a small on-policy batch, walks one episode's reward tail through
the discounted-return recursion (including the value bootstrap at the
horizon), contrasts the standard estimator with the episode-indexed
variant, and shows what batch normalization does to the advantages.
"""

import numpy as np

from scorpion_rl import (
    EnvConfig,
    PpoConfig,
    ScorpionEnv,
    collect,
    compute_returns,
    fill_advantages,
    fill_returns,
    make_policy,
    make_value,
)


def main():
    cfg = PpoConfig(horizon=40, batch_episodes=3)
    env_cfg = EnvConfig(dt=cfg.dt, horizon=cfg.horizon)
    policy, value = make_policy(0), make_value(1)
    batch = collect(lambda: ScorpionEnv(env_cfg), policy, value, cfg, iteration=1)
    print(f"collected {batch.obs.shape[0]} steps "
          f"({cfg.batch_episodes} episodes x {cfg.horizon})")
    print(f"episode reward sums: {np.round(batch.ep_returns, 3)}")
    print()

    fill_returns(batch, cfg.gamma)
    sl = batch.episode_slices()[0]
    r = batch.rewards[sl]
    v = batch.returns[sl]
    b = float(batch.bootstraps[0])
    print("== one episode, last 5 steps ==")
    print(f"bootstrap value at the final state: {b:+.4f}")
    for t in range(35, 40):
        nxt = v[t + 1] if t + 1 < 40 else b
        print(f"  t={t}  reward {r[t]:+.4f}  return {v[t]:+.4f}"
              f"  = reward + {cfg.gamma} * {nxt:+.4f}")
    print()

    literal = compute_returns(r, b, cfg.gamma, episode_indexed=True)
    print("== standard vs episode-indexed discounting ==")
    print("the variant weights reward r_i by gamma^i instead of gamma^(i-t),")
    print("so later start steps see smaller magnitudes:")
    for t in (0, 10, 30):
        print(f"  t={t:2d}  standard {v[t]:+.4f}  episode-indexed {literal[t]:+.4f}")
    print()

    fill_advantages(batch)
    raw = batch.returns - batch.value_preds
    adv = batch.advantages
    print("== advantages ==")
    print(f"raw return - value: mean {raw.mean():+.4f}, std {raw.std():.4f}")
    print(f"normalized:         mean {adv.mean():+.1e}, std {adv.std():.4f}")
    print("normalization recenters each batch so roughly half the actions are")
    print("reinforced and half discouraged, whatever the reward scale is")


if __name__ == "__main__":
    main()
