"""Planar waypoint-tracking simulator for a scorpion-style differential-drive robot.

The robot body is reduced to a unicycle: left/right wheel speeds set forward
and turning rates, the tail angle drags body pitch through a first-order lag,
and pitch in turn attenuates forward speed. The controller-facing surfaces
(5-component normalized observation, 3-component normalized action, distance
reward, goal-frame shifting) are fixed contracts; the dynamics constants in
between live in :class:`EnvConfig` so the surrogate can be retuned without
touching any interface.

Conventions: world positions in arena units, angles in radians wrapped to
[-pi, pi], the arena is the square [-100, 100]^2 and the body height is a
constant 15 units.
"""

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

ARENA_HALF = 100.0      # positions are clamped to [-ARENA_HALF, ARENA_HALF]
BODY_HEIGHT = 15.0      # z never changes; the body stays horizontal
WHEEL_SPEED_MAX = 3.5   # rad/s; faster commands destabilize the real gait
TAIL_MIN = 0.26         # rad
TAIL_MAX = 0.47         # rad
TAIL_MID = 0.365        # rad, midpoint of the tail range
TAIL_HALF_SPAN = 0.105  # rad, half-width of the tail range
REWARD_SCALE = 2e-3     # reward = -REWARD_SCALE * distance-to-goal


class ActionNorm(NamedTuple):
    """Normalized action, every component in [-1, 1]."""

    m_left: float
    m_right: float
    tail: float


class MotorCommand(NamedTuple):
    """Physically scaled action: wheel speeds in rad/s, tail angle in rad."""

    omega_left: float
    omega_right: float
    tail_angle: float


@dataclass(slots=True)
class RobotState:
    """Ground-truth world-frame pose plus the current tail angle."""

    x: float
    y: float
    yaw: float
    roll: float = 0.0
    pitch: float = 0.0
    tail: float = TAIL_MID
    z: float = BODY_HEIGHT


@dataclass(frozen=True)
class EnvConfig:
    """Simulator constants.

    ``dt``/``horizon`` define episode timing (training uses 500 steps of
    0.1 s, evaluation 1000). ``speed_gain``, ``wheelbase``, ``pitch_gain``
    and ``pitch_lag`` parameterize the surrogate dynamics. ``waypoint`` is
    the initial tracking target; observations and rewards are expressed in
    the frame where it sits at the origin.
    """

    dt: float = 0.1
    horizon: int = 500
    speed_gain: float = 3.0
    wheelbase: float = 5.0
    tail_neutral: float = TAIL_MID
    pitch_gain: float = 1.0
    pitch_lag: float = 0.5
    waypoint: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"env.dt must be > 0, got {self.dt}")
        if self.horizon < 1:
            raise ValueError(f"env.horizon must be >= 1, got {self.horizon}")
        if not self.speed_gain > 0:
            raise ValueError(f"env.speed_gain must be > 0, got {self.speed_gain}")
        if not self.wheelbase > 0:
            raise ValueError(f"env.wheelbase must be > 0, got {self.wheelbase}")
        if not 0.0 < self.pitch_lag <= 1.0:
            raise ValueError(f"env.pitch_lag must be in (0, 1], got {self.pitch_lag}")
        if not TAIL_MIN <= self.tail_neutral <= TAIL_MAX:
            raise ValueError(f"env.tail_neutral must be in [{TAIL_MIN}, {TAIL_MAX}]")
        if len(self.waypoint) != 2:
            raise ValueError("env.waypoint must be a pair (x, y)")
        object.__setattr__(self, "waypoint", (float(self.waypoint[0]), float(self.waypoint[1])))


def wrap_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi]. Identity (bit-exact) for in-range values."""
    if -math.pi <= a <= math.pi:
        return a
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _clamp_arena(v: float) -> float:
    if v < -ARENA_HALF:
        return -ARENA_HALF
    if v > ARENA_HALF:
        return ARENA_HALF
    return v


def clamp_action(action) -> ActionNorm:
    """Coerce any 3-sequence into an ActionNorm with components in [-1, 1]."""
    m_l, m_r, t = (float(c) for c in action)
    return ActionNorm(
        min(1.0, max(-1.0, m_l)),
        min(1.0, max(-1.0, m_r)),
        min(1.0, max(-1.0, t)),
    )


def scale_action(action) -> MotorCommand:
    """Map a normalized action onto physical motor commands.

    Wheel components scale linearly by 3.5 rad/s; the tail component maps
    affinely onto [0.26, 0.47] rad (exact at -1, 0, +1). Inputs are clamped
    to [-1, 1] first.
    """
    a = clamp_action(action)
    return MotorCommand(
        WHEEL_SPEED_MAX * a.m_left,
        WHEEL_SPEED_MAX * a.m_right,
        TAIL_MID + TAIL_HALF_SPAN * a.tail,
    )


def dynamics_step(state: RobotState, cmd: MotorCommand, dt: float, config: EnvConfig) -> RobotState:
    """Advance the surrogate dynamics by one step of length ``dt``.

    Unicycle update: forward speed is the wheel mean scaled by ``speed_gain``
    and attenuated by cos(pitch); yaw rate is the wheel difference over the
    wheelbase. The tail relaxes toward its commanded angle at rate
    ``pitch_lag`` per step and sets pitch through ``pitch_gain``. Roll stays
    0, positions are clamped to the arena.
    """
    v = config.speed_gain * 0.5 * (cmd.omega_left + cmd.omega_right) * math.cos(state.pitch)
    yaw_rate = config.speed_gain * (cmd.omega_right - cmd.omega_left) / config.wheelbase
    x = _clamp_arena(state.x + v * math.cos(state.yaw) * dt)
    y = _clamp_arena(state.y + v * math.sin(state.yaw) * dt)
    yaw = wrap_angle(state.yaw + yaw_rate * dt)
    tail = state.tail + config.pitch_lag * (cmd.tail_angle - state.tail)
    pitch = config.pitch_gain * (tail - config.tail_neutral)
    return RobotState(x=x, y=y, yaw=yaw, roll=0.0, pitch=pitch, tail=tail)


def reward(state: RobotState) -> float:
    """Distance penalty for a state already expressed in the goal frame."""
    return -REWARD_SCALE * math.hypot(state.x, state.y)


def shift_frame(state: RobotState, waypoint: Sequence[float]) -> RobotState:
    """Re-express a pose in the frame whose origin is ``waypoint``.

    Only positions shift; orientation and tail are frame-independent. The
    reward of the shifted state is the distance penalty to the waypoint.
    """
    wx, wy = float(waypoint[0]), float(waypoint[1])
    return replace(state, x=state.x - wx, y=state.y - wy)


class ScorpionEnv:
    """Episodic simulator with the usual reset/step surface.

    Observations are ``[(x - wx)/100, (y - wy)/100, roll/pi, pitch/pi,
    yaw/pi]`` for the active waypoint ``(wx, wy)``; with the waypoint at the
    origin every component stays in [-1, 1]. A full episode is a
    deterministic function of (seed, config, action sequence).
    """

    def __init__(self, config: Optional[EnvConfig] = None):
        self.config = config if config is not None else EnvConfig()
        self._state: Optional[RobotState] = None
        self._waypoint = self.config.waypoint
        self._steps = 0

    @property
    def state(self) -> RobotState:
        if self._state is None:
            raise RuntimeError("environment not reset")
        return self._state

    @property
    def waypoint(self) -> Tuple[float, float]:
        return self._waypoint

    @property
    def step_count(self) -> int:
        return self._steps

    def reset(self, seed: int, init_pose: Optional[Sequence[float]] = None) -> np.ndarray:
        """Start a new episode and return the initial observation.

        Default initialization draws x, y ~ U[-100, 100] and yaw ~ U[-pi, pi];
        ``init_pose = (x, y, yaw)`` overrides the draw. Roll and pitch start
        at 0 with the tail at its neutral angle.
        """
        if init_pose is not None:
            x, y, yaw = (float(v) for v in init_pose)
            x, y, yaw = _clamp_arena(x), _clamp_arena(y), wrap_angle(yaw)
        else:
            rng = np.random.default_rng(seed)
            x = rng.uniform(-ARENA_HALF, ARENA_HALF)
            y = rng.uniform(-ARENA_HALF, ARENA_HALF)
            yaw = rng.uniform(-math.pi, math.pi)
        self._state = RobotState(x=x, y=y, yaw=yaw, roll=0.0, pitch=0.0,
                                 tail=self.config.tail_neutral)
        self._waypoint = self.config.waypoint
        self._steps = 0
        return self.observation()

    def set_waypoint(self, waypoint: Sequence[float]) -> None:
        """Shift the goal frame to a new waypoint mid-episode."""
        if len(waypoint) != 2:
            raise ValueError("waypoint must be a pair (x, y)")
        self._waypoint = (float(waypoint[0]), float(waypoint[1]))

    def observation(self) -> np.ndarray:
        """Observation of the current state in the active goal frame."""
        s = self.state
        wx, wy = self._waypoint
        return np.array([
            (s.x - wx) / ARENA_HALF,
            (s.y - wy) / ARENA_HALF,
            s.roll / math.pi,
            s.pitch / math.pi,
            s.yaw / math.pi,
        ])

    def step(self, action):
        """Apply one normalized action; returns (obs, reward, done, info).

        ``info`` carries the raw world-frame state, the executed (clamped)
        action, the scaled motor command and the active waypoint. Stepping a
        finished episode raises, since that always indicates a harness bug.
        """
        if self._state is None:
            raise RuntimeError("step() called before reset()")
        if self._steps >= self.config.horizon:
            raise RuntimeError("step() called on a finished episode; call reset()")
        act = clamp_action(action)
        cmd = scale_action(act)
        self._state = dynamics_step(self._state, cmd, self.config.dt, self.config)
        self._steps += 1
        rew = reward(shift_frame(self._state, self._waypoint))
        done = self._steps >= self.config.horizon
        info = {
            "state": replace(self._state),
            "action": act,
            "command": cmd,
            "waypoint": self._waypoint,
            "step": self._steps,
        }
        return self.observation(), rew, done, info
