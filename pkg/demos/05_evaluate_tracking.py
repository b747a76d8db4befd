"""Evaluate a trained policy: repeated resets and a waypoint shift.

Loads the checkpoint written by demo 04 (complaining helpfully if it is
missing), runs the repeated-reset convergence study, then replays the
two-phase scenario where the goal jumps from (-50, -50) to the origin
mid-episode.
"""

from pathlib import Path

import numpy as np

from scorpion_rl import (
    EnvConfig,
    Scenario,
    eval_deterministic,
    failure_rate,
    load_checkpoint,
    make_policy,
)

CKPT = Path(__file__).resolve().parent / "out" / "train_demo" / "checkpoint_final.ckpt"
OUT_DIR = Path(__file__).resolve().parent / "out" / "eval_demo"


def main():
    if not CKPT.exists():
        raise SystemExit(f"no checkpoint at {CKPT}; run demos/04_train_waypoint_policy.py first")
    policy = load_checkpoint(CKPT).policy
    env_cfg = EnvConfig()

    print("== repeated-reset convergence study ==")
    report = failure_rate(policy, n_runs=25, horizon=1000, margin=10.0, seed=0,
                          env_cfg=env_cfg, out_dir=OUT_DIR / "failure_rate")
    print(f"converged {report.n_converged}/{report.n_runs} "
          f"(failure rate {report.failure_rate:.2f}, margin {report.margin} units)")
    print(f"final distances, sorted: {np.round(sorted(report.final_distances), 1)}")

    untrained = make_policy(seed=123)
    base = failure_rate(untrained, n_runs=25, horizon=1000, margin=10.0, seed=0,
                        env_cfg=env_cfg)
    print(f"untrained baseline: {base.n_converged}/25 converged")
    print()

    print("== waypoint-shift tracking ==")
    scen = Scenario(waypoints=((0, (-50.0, -50.0)), (2000, (0.0, 0.0))),
                    horizon=4000, init_pose=(0.0, 0.0, 0.0))
    log = eval_deterministic(policy, scen, env_cfg=env_cfg)
    log.write_csv(OUT_DIR / "waypoint_shift.csv")
    dist = log.dist_to_waypoint()
    for end in scen.phase_end_steps():
        wp = (float(log.data["wp_x"][end]), float(log.data["wp_y"][end]))
        print(f"phase ending at step {end}: {dist[end]:.2f} units from waypoint {wp}")
    print(f"trajectory: {OUT_DIR / 'waypoint_shift.csv'}")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
    axes[0].plot(log.data["x"], log.data["y"], lw=0.9)
    for step, wp in scen.waypoints:
        axes[0].plot(*wp, "r*", ms=12)
    axes[0].set_title("waypoint-shift path")
    axes[0].set_xlabel("x")
    axes[0].set_ylabel("y")
    axes[0].axis("equal")
    axes[1].plot(log.data["t_sec"], dist, lw=0.9)
    axes[1].axhline(10.0, color="r", ls="--", lw=0.8)
    axes[1].set_title("distance to active waypoint")
    axes[1].set_xlabel("time [s]")
    axes[1].set_ylabel("distance")
    fig.tight_layout()
    fig.savefig(OUT_DIR / "tracking.png", dpi=120)
    print(f"plot: {OUT_DIR / 'tracking.png'}")


if __name__ == "__main__":
    main()
