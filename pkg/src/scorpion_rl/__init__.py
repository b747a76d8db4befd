"""RL control stack for a scorpion-style differential-drive robot.

Trains a Gaussian PPO policy to reach waypoints in a deterministic planar
surrogate simulator and evaluates it with deterministic rollouts, waypoint
schedules and a repeated-reset convergence study. Pure numpy; the network
engine, gradients and optimizer are implemented in this package.
"""

__version__ = "0.1.0"

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .config import (ConfigError, RunConfig, load_run_config, load_scenario,
                     parse_run_config)
from .env import (ARENA_HALF, BODY_HEIGHT, REWARD_SCALE, TAIL_MAX, TAIL_MID,
                  TAIL_MIN, WHEEL_SPEED_MAX, ActionNorm, EnvConfig,
                  MotorCommand, RobotState, ScorpionEnv, clamp_action,
                  dynamics_step, reward, scale_action, shift_frame, wrap_angle)
from .harness import (EvalReport, Scenario, TrainingDiverged, TrainResult,
                      eval_deterministic, failure_rate, mean_action, train)
from .logio import (METRICS_KEYS, TRAJECTORY_COLUMNS, TrajectoryLog,
                    read_metrics, read_trajectory_csv)
from .nets import (AdamState, Mlp, adam_update, backward, flatten_params,
                   forward, grad_check, init_mlp, unflatten_params)
from .ppo import (ACTION_DIM, HIDDEN_SIZES, OBS_DIM, POLICY_SIZES,
                  VALUE_SIZES, PpoConfig, TrajectoryBatch, collect,
                  compute_returns, fill_advantages, fill_returns,
                  gaussian_entropy, gaussian_log_prob, make_policy,
                  make_value, ppo_loss, value_loss)

__all__ = [
    "__version__",
    "ARENA_HALF", "BODY_HEIGHT", "REWARD_SCALE", "TAIL_MAX", "TAIL_MID",
    "TAIL_MIN", "WHEEL_SPEED_MAX",
    "ActionNorm", "EnvConfig", "MotorCommand", "RobotState", "ScorpionEnv",
    "clamp_action", "dynamics_step", "reward", "scale_action", "shift_frame",
    "wrap_angle",
    "AdamState", "Mlp", "adam_update", "backward", "flatten_params",
    "forward", "grad_check", "init_mlp", "unflatten_params",
    "ACTION_DIM", "HIDDEN_SIZES", "OBS_DIM", "POLICY_SIZES", "VALUE_SIZES",
    "PpoConfig", "TrajectoryBatch", "collect", "compute_returns",
    "fill_advantages", "fill_returns", "gaussian_entropy",
    "gaussian_log_prob", "make_policy", "make_value", "ppo_loss",
    "value_loss",
    "EvalReport", "Scenario", "TrainingDiverged", "TrainResult",
    "eval_deterministic", "failure_rate", "mean_action", "train",
    "RunConfig", "ConfigError", "load_run_config", "load_scenario",
    "parse_run_config",
    "Checkpoint", "CheckpointError", "load_checkpoint", "save_checkpoint",
    "METRICS_KEYS", "TRAJECTORY_COLUMNS", "TrajectoryLog", "read_metrics",
    "read_trajectory_csv",
]
