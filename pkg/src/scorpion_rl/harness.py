"""Training loop, deterministic evaluation and the convergence study.

Everything here is a thin orchestration layer: the learning math lives in
``ppo``, the dynamics in ``env``. Evaluation always drives the environment
with the clamped policy mean (no sampling), so an evaluation run is fully
determined by the checkpoint, the scenario and the reset seed.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .checkpoint import save_checkpoint
from .env import EnvConfig, ScorpionEnv
from .logio import TrajectoryLog, metrics_line
from .nets import AdamState, Mlp, adam_update, copy_params, forward, params_finite
from .ppo import (PpoConfig, collect, fill_advantages, fill_returns, make_policy,
                  make_value, ppo_loss, value_loss)

CHECKPOINT_EVERY = 100


class TrainingDiverged(RuntimeError):
    """Raised when training hits non-finite numbers; last good state is saved."""


@dataclass(frozen=True)
class Scenario:
    """Waypoint schedule for one evaluation episode.

    ``waypoints`` maps activation steps to targets; the first entry must
    activate at step 0 and steps must increase strictly. ``init_pose``
    optionally pins the reset pose as (x, y, yaw) instead of drawing it.
    """

    waypoints: Tuple[Tuple[int, Tuple[float, float]], ...]
    horizon: int = 1000
    init_pose: Optional[Tuple[float, float, float]] = None

    def __post_init__(self):
        wps = tuple((int(s), (float(w[0]), float(w[1]))) for s, w in self.waypoints)
        if not wps:
            raise ValueError("scenario needs at least one waypoint")
        if wps[0][0] != 0:
            raise ValueError(f"first waypoint must activate at step 0, got {wps[0][0]}")
        steps = [s for s, _ in wps]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError(f"waypoint activation steps must increase strictly, got {steps}")
        if self.horizon < 1:
            raise ValueError(f"scenario horizon must be >= 1, got {self.horizon}")
        object.__setattr__(self, "waypoints", wps)
        if self.init_pose is not None:
            if len(self.init_pose) != 3:
                raise ValueError("init_pose must be (x, y, yaw)")
            object.__setattr__(self, "init_pose", tuple(float(v) for v in self.init_pose))

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ValueError("scenario must be an object")
        unknown = set(d) - {"waypoints", "horizon", "init_pose"}
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        if "waypoints" not in d:
            raise ValueError("scenario is missing 'waypoints'")
        try:
            wps = tuple((int(item[0]), (float(item[1][0]), float(item[1][1])))
                        for item in d["waypoints"])
        except (TypeError, ValueError, IndexError) as exc:
            raise ValueError(f"scenario waypoints must be [step, [x, y]] pairs: {exc}") from exc
        init = d.get("init_pose")
        return cls(waypoints=wps, horizon=int(d.get("horizon", 1000)),
                   init_pose=None if init is None else tuple(init))

    def to_dict(self) -> dict:
        return {
            "waypoints": [[s, [w[0], w[1]]] for s, w in self.waypoints],
            "horizon": self.horizon,
            "init_pose": None if self.init_pose is None else list(self.init_pose),
        }

    def phase_end_steps(self) -> List[int]:
        """Last step index of each waypoint's active phase."""
        starts = [s for s, _ in self.waypoints]
        return [s - 1 for s in starts[1:]] + [self.horizon - 1]


@dataclass
class TrainResult:
    final_checkpoint: Path
    checkpoints: List[Path]
    metrics: List[dict]
    metrics_path: Path


@dataclass
class EvalReport:
    """Outcome of the repeated-reset convergence study."""

    n_runs: int
    n_converged: int
    margin: float
    horizon: int
    seed: int
    final_distances: List[float]
    trajectory_files: List[str]

    @property
    def failure_rate(self) -> float:
        return 1.0 - self.n_converged / self.n_runs

    def to_dict(self) -> dict:
        converged = [d < self.margin for d in self.final_distances]
        among = [d for d, c in zip(self.final_distances, converged) if c]
        return {
            "n_runs": self.n_runs,
            "n_converged": self.n_converged,
            "failure_rate": self.failure_rate,
            "margin": self.margin,
            "horizon": self.horizon,
            "seed": self.seed,
            "mean_final_distance_converged": (sum(among) / len(among)) if among else None,
            "final_distances": self.final_distances,
            "converged": converged,
            "trajectory_files": self.trajectory_files,
        }


def mean_action(policy: Mlp, obs) -> np.ndarray:
    """Deterministic action: the clamped policy mean."""
    return np.clip(forward(policy, obs)[0], -1.0, 1.0)


def _run_episode(policy: Mlp, env: ScorpionEnv, horizon: int,
                 schedule: Optional[Dict[int, Tuple[float, float]]] = None) -> TrajectoryLog:
    """Drive a reset environment with mean actions, logging every step."""
    dt = env.config.dt
    obs = env.observation()
    rows = []
    for t in range(horizon):
        if schedule and t > 0 and t in schedule:
            env.set_waypoint(schedule[t])
            obs = env.observation()
        act = mean_action(policy, obs)
        obs, rew, _, info = env.step(act)
        s = info["state"]
        wp = info["waypoint"]
        rows.append((t, t * dt, s.x, s.y, s.roll, s.pitch, s.yaw,
                     act[0], act[1], act[2], rew, wp[0], wp[1]))
    return TrajectoryLog.from_rows(rows)


def eval_deterministic(policy: Mlp, scenario: Scenario, seed: int = 0,
                       env_cfg: Optional[EnvConfig] = None) -> TrajectoryLog:
    """Run one episode under a waypoint schedule with the deterministic policy.

    The environment horizon and initial waypoint come from the scenario;
    later waypoints shift the goal frame mid-episode without touching the
    world state.
    """
    base = env_cfg if env_cfg is not None else EnvConfig()
    cfg = replace(base, horizon=scenario.horizon, waypoint=scenario.waypoints[0][1])
    env = ScorpionEnv(cfg)
    env.reset(seed, init_pose=scenario.init_pose)
    schedule = dict(scenario.waypoints)
    return _run_episode(policy, env, scenario.horizon, schedule)


def failure_rate(policy: Mlp, n_runs: int = 25, horizon: int = 1000,
                 margin: float = 10.0, seed: int = 0,
                 env_cfg: Optional[EnvConfig] = None,
                 out_dir=None) -> EvalReport:
    """Repeated-reset study: how often the policy settles at the origin.

    Each run resets from a fresh random pose (seeds spawned off ``seed``)
    and is marked converged when the mean distance to the waypoint over the
    final 100 steps is below ``margin``. With ``out_dir`` set, writes one
    trajectory CSV per run plus a ``report.json`` summary.
    """
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    if not margin > 0:
        raise ValueError(f"margin must be > 0, got {margin}")
    base = env_cfg if env_cfg is not None else EnvConfig()
    cfg = replace(base, horizon=horizon, waypoint=(0.0, 0.0))
    out_dir = Path(out_dir) if out_dir is not None else None
    finals: List[float] = []
    files: List[str] = []
    for i in range(n_runs):
        run_seed = int(np.random.SeedSequence(seed, spawn_key=(i,))
                       .generate_state(1, np.uint64)[0])
        env = ScorpionEnv(cfg)
        env.reset(run_seed)
        log = _run_episode(policy, env, horizon)
        dist = log.dist_to_waypoint()
        finals.append(float(dist[-min(100, dist.size):].mean()))
        if out_dir is not None:
            name = f"run_{i:03d}.csv"
            log.write_csv(out_dir / name)
            files.append(name)
    n_conv = sum(1 for d in finals if d < margin)
    report = EvalReport(n_runs=n_runs, n_converged=n_conv, margin=float(margin),
                        horizon=horizon, seed=seed, final_distances=finals,
                        trajectory_files=files)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return report


def train(run_cfg, out_dir, checkpoint_every: int = CHECKPOINT_EVERY) -> TrainResult:
    """Full PPO training run; writes metrics JSONL and periodic checkpoints.

    ``run_cfg`` needs ``env`` (EnvConfig), ``ppo`` (PpoConfig) and a
    ``digest()`` method; episode timing comes from the ppo section. If any
    update produces non-finite numbers the loop stops, saves the last good
    state as ``checkpoint_last_good.ckpt`` and raises TrainingDiverged.
    """
    cfg: PpoConfig = run_cfg.ppo
    env_cfg = replace(run_cfg.env, dt=cfg.dt, horizon=cfg.horizon)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = run_cfg.digest()

    root = np.random.SeedSequence(cfg.seed)
    policy_seq, value_seq = root.spawn(2)
    policy = make_policy(int(policy_seq.generate_state(1, np.uint64)[0]))
    value = make_value(int(value_seq.generate_state(1, np.uint64)[0]))
    policy_opt = AdamState.for_params(policy)
    value_opt = AdamState.for_params(value)
    sgd = cfg.optimizer == "sgd"

    def env_factory():
        return ScorpionEnv(env_cfg)

    metrics_path = out_dir / "metrics.jsonl"
    metrics: List[dict] = []
    ckpt_paths: List[Path] = []
    last_good = (copy_params(policy), copy_params(value),
                 policy_opt.copy(), value_opt.copy(), 0)
    with open(metrics_path, "w") as mfh:
        for it in range(1, cfg.epochs + 1):
            try:
                batch = collect(env_factory, policy, value, cfg, iteration=it)
                fill_returns(batch, cfg.gamma, episode_indexed=cfg.episode_indexed_returns)
                fill_advantages(batch)
                vloss_first = None
                for k in range(cfg.value_updates):
                    vl, vgrads = value_loss(batch, value)
                    if k == 0:
                        vloss_first = vl
                    adam_update(value, vgrads, cfg.lr, value_opt, sgd=sgd)
                # ratio dev in the metrics row is from the last pass, so it
                # reflects how far the batch moved the policy (0 when
                # policy_updates == 1)
                for k in range(cfg.policy_updates):
                    ploss, pgrads, info = ppo_loss(batch, policy, cfg)
                    adam_update(policy, pgrads, cfg.lr, policy_opt, sgd=sgd)
            except ValueError as exc:
                _save_last_good(out_dir, last_good, digest)
                raise TrainingDiverged(
                    f"iteration {it}: {exc}; last good state saved") from exc
            if not (params_finite(policy) and params_finite(value)
                    and math.isfinite(ploss) and math.isfinite(vloss_first)):
                _save_last_good(out_dir, last_good, digest)
                raise TrainingDiverged(
                    f"iteration {it}: non-finite parameters or losses; last good state saved")
            row = {
                "iter": it,
                "mean_return": float(batch.ep_returns.mean()),
                "policy_loss": ploss,
                "value_loss": vloss_first,
                "entropy": info["entropy"],
                "mean_abs_ratio_dev": info["mean_abs_ratio_dev"],
            }
            mfh.write(metrics_line(row) + "\n")
            metrics.append(row)
            last_good = (copy_params(policy), copy_params(value),
                         policy_opt.copy(), value_opt.copy(), it)
            if it % checkpoint_every == 0 and it < cfg.epochs:
                p = save_checkpoint(out_dir / f"checkpoint_{it:06d}.ckpt",
                                    policy, value, policy_opt, value_opt, it, digest)
                ckpt_paths.append(p)
    final = save_checkpoint(out_dir / "checkpoint_final.ckpt",
                            policy, value, policy_opt, value_opt, cfg.epochs, digest)
    ckpt_paths.append(final)
    return TrainResult(final_checkpoint=final, checkpoints=ckpt_paths,
                       metrics=metrics, metrics_path=metrics_path)


def _save_last_good(out_dir: Path, snapshot, digest: str) -> Path:
    policy, value, policy_opt, value_opt, it = snapshot
    return save_checkpoint(out_dir / "checkpoint_last_good.ckpt",
                           policy, value, policy_opt, value_opt, it, digest)
