"""Train a waypoint-tracking policy (abbreviated run).

Runs the full training loop at a reduced iteration count so the demo
finishes in a few minutes, prints the learning curve, and leaves a
checkpoint for demo 05. Pass --full for the complete 1500-iteration run
used by the evaluation protocols.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from scorpion_rl import EnvConfig, PpoConfig, RunConfig, train

OUT_DIR = Path(__file__).resolve().parent / "out" / "train_demo"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--full", action="store_true",
                        help="run all 1500 iterations instead of 400")
    parser.add_argument("--seed", type=int, default=2)
    args = parser.parse_args()

    epochs = 1500 if args.full else 400
    cfg = RunConfig(env=EnvConfig(), ppo=PpoConfig(seed=args.seed, epochs=epochs))
    print(f"training seed {args.seed} for {epochs} iterations "
          f"({cfg.ppo.batch_episodes} episodes x {cfg.ppo.horizon} steps each)")
    print(f"output: {OUT_DIR}")
    t0 = time.time()
    result = train(cfg, OUT_DIR)
    wall = time.time() - t0

    returns = np.array([row["mean_return"] for row in result.metrics])
    vlosses = np.array([row["value_loss"] for row in result.metrics])
    print(f"\nfinished in {wall:.0f} s")
    print("\niter   mean_return   value_loss")
    idx = np.unique(np.linspace(0, len(returns) - 1, 12).astype(int))
    for i in idx:
        print(f"{i + 1:5d}   {returns[i]:+10.2f}   {vlosses[i]:10.4f}")
    first, last = returns[:10].mean(), returns[-100:].mean()
    print(f"\nmean return, first 10 iterations: {first:+.2f}")
    print(f"mean return, last 100 iterations: {last:+.2f}")
    print(f"improvement toward zero: {abs(first) / abs(last):.2f}x")
    print(f"\ncheckpoint for demo 05: {result.final_checkpoint}")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(np.arange(1, len(returns) + 1), returns, lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean episode return")
    ax.set_title("training curve")
    fig.tight_layout()
    fig.savefig(OUT_DIR / "learning_curve.png", dpi=120)
    print(f"learning curve plot: {OUT_DIR / 'learning_curve.png'}")


if __name__ == "__main__":
    main()
