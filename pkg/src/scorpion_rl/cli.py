"""Command-line entry points: train, eval, failure-rate, gradcheck, version.

Exit codes: 0 on success, 1 for validation problems (bad flags, unreadable
config or checkpoint, missing files), 2 for runtime failures (training
divergence, a failed gradient check).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import CheckpointError, load_checkpoint
from .config import ConfigError, load_run_config, load_scenario
from .env import EnvConfig
from .harness import TrainingDiverged, eval_deterministic, failure_rate, train
from .nets import forward, grad_check, init_mlp
from .ppo import (OBS_DIM, PpoConfig, TrajectoryBatch, gaussian_log_prob,
                  make_policy, ppo_loss, value_loss)

GRADCHECK_TOL = 1e-4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scorpion-rl",
        description="Train and evaluate a waypoint-tracking policy for the "
                    "scorpion robot surrogate.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run PPO training")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.add_argument("--seed", type=int, help="override ppo.seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="deterministic rollout under a waypoint schedule")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="reset seed (default 0)")
    p.add_argument("--config", help="run configuration, used for the env section")
    p.add_argument("--strict", action="store_true",
                   help="require the checkpoint digest to match --config")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("failure-rate", help="repeated-reset convergence study")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--runs", type=int, default=25)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--margin", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="run configuration, used for the env section")
    p.add_argument("--strict", action="store_true",
                   help="require the checkpoint digest to match --config")
    p.set_defaults(func=cmd_failure_rate)

    p = sub.add_parser("gradcheck", help="finite-difference check of the gradient engine")
    p.add_argument("--probes", type=int, default=200, help="probes per network")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("version", help="print the package version")
    p.set_defaults(func=cmd_version)
    return parser


def _load_env_and_digest(args):
    """Env section and digest from --config when given, defaults otherwise."""
    if getattr(args, "config", None):
        cfg = load_run_config(args.config)
        return cfg.env, cfg.digest()
    if getattr(args, "strict", False):
        raise ConfigError("--strict needs --config to know the expected digest")
    return EnvConfig(), None


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = args.out or cfg.out_dir
    if not out:
        raise ConfigError("no output directory: pass --out or set out_dir in the config")
    result = train(cfg, out)
    last = result.metrics[-1]
    print(f"trained {last['iter']} iterations, final mean return {last['mean_return']:.4f}")
    print(f"checkpoint: {result.final_checkpoint}")
    print(f"metrics: {result.metrics_path}")
    return 0


def cmd_eval(args) -> int:
    env_cfg, digest = _load_env_and_digest(args)
    ckpt = load_checkpoint(args.checkpoint,
                           expected_digest=digest if args.strict else None)
    scenario = load_scenario(args.scenario)
    log = eval_deterministic(ckpt.policy, scenario, seed=args.seed, env_cfg=env_cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log.write_csv(out / "trajectory.csv")
    dist = log.dist_to_waypoint()
    ends = scenario.phase_end_steps()
    summary = {
        "scenario": scenario.to_dict(),
        "seed": args.seed,
        "checkpoint": str(args.checkpoint),
        "phase_end_steps": ends,
        "phase_end_distances": [float(dist[e]) for e in ends],
        "final_distance": float(dist[-1]),
    }
    (out / "eval_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    for e, d in zip(ends, summary["phase_end_distances"]):
        print(f"step {e}: distance to waypoint {d:.3f}")
    print(f"trajectory: {out / 'trajectory.csv'}")
    return 0


def cmd_failure_rate(args) -> int:
    env_cfg, digest = _load_env_and_digest(args)
    ckpt = load_checkpoint(args.checkpoint,
                           expected_digest=digest if args.strict else None)
    report = failure_rate(ckpt.policy, n_runs=args.runs, horizon=args.horizon,
                          margin=args.margin, seed=args.seed, env_cfg=env_cfg,
                          out_dir=args.out)
    print(f"converged {report.n_converged}/{report.n_runs} runs "
          f"(failure rate {report.failure_rate:.3f}, margin {report.margin})")
    print(f"report: {Path(args.out) / 'report.json'}")
    return 0


def _synthetic_batch(rng, n: int) -> TrajectoryBatch:
    obs = rng.uniform(-1.0, 1.0, size=(n, OBS_DIM))
    actions = rng.normal(0.0, 0.7, size=(n, 3))
    returns = rng.normal(-0.5, 0.3, size=n)
    adv = rng.normal(0.0, 1.0, size=n)
    log_probs = rng.normal(-3.0, 0.5, size=n)
    batch = TrajectoryBatch(
        obs=obs, actions=actions, log_probs=log_probs,
        rewards=np.zeros(n), value_preds=np.zeros(n),
        ep_lengths=np.array([n]), bootstraps=np.zeros(1),
        ep_returns=np.zeros(1), final_obs=obs[-1:].copy(),
        returns=returns, advantages=adv)
    return batch


def cmd_gradcheck(args) -> int:
    """Probe the analytic gradients of both losses on freshly seeded nets."""
    cfg = PpoConfig()
    worst = 0.0
    for i in range(5):
        rng = np.random.default_rng(1000 + i)
        batch = _synthetic_batch(rng, 32)
        policy = make_policy(seed=2000 + i)
        # behavior log-probs near the current ones keep ratios in a sane range
        mean0, _ = forward(policy, batch.obs)
        batch.log_probs = gaussian_log_prob(mean0, policy.log_std, batch.actions) \
            + rng.uniform(-0.1, 0.1, size=batch.obs.shape[0])
        err = grad_check(policy, lambda p: ppo_loss(batch, p, cfg)[:2],
                         n_probes=args.probes, seed=args.seed + i)
        worst = max(worst, err)
        value = init_mlp((OBS_DIM, 128, 64, 1), seed=3000 + i)
        err = grad_check(value, lambda p: value_loss(batch, p),
                         n_probes=args.probes, seed=args.seed + 10 + i)
        worst = max(worst, err)
    print(f"gradcheck max relative error: {worst:.3e} (tolerance {GRADCHECK_TOL:.0e})")
    if worst >= GRADCHECK_TOL:
        print("gradcheck FAILED", file=sys.stderr)
        return 2
    print("gradcheck passed")
    return 0


def cmd_version(args) -> int:
    from . import __version__
    print(__version__)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is a runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
