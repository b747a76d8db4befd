"""Tour of the surrogate simulator.

Walks through the action pipeline (normalize -> clamp -> scale), the
unicycle dynamics, the distance reward and the goal-frame observation,
then drives a hand-scripted figure toward the origin to show the pieces
working together.
"""

import math

import numpy as np

from scorpion_rl import (
    EnvConfig,
    RobotState,
    ScorpionEnv,
    dynamics_step,
    reward,
    scale_action,
    shift_frame,
)


def action_pipeline():
    print("== action pipeline ==")
    for a in [(1.0, 1.0, 1.0), (-1.0, -1.0, -1.0), (0.0, 0.0, 0.0), (2.5, -0.3, 0.4)]:
        cmd = scale_action(a)
        print(f"  normalized {a} -> wheels ({cmd.omega_left:+.2f}, {cmd.omega_right:+.2f}) "
              f"rad/s, tail {cmd.tail_angle:.3f} rad")
    print("  wheel components scale by 3.5; the tail maps onto [0.26, 0.47] rad")
    print()


def single_steps():
    print("== single dynamics steps ==")
    cfg = EnvConfig()
    s = RobotState(x=0.0, y=0.0, yaw=0.0)
    s1 = dynamics_step(s, scale_action((1.0, 1.0, 0.0)), cfg.dt, cfg)
    print(f"  matched wheels from rest: x {s.x:.3f} -> {s1.x:.3f} (straight line)")
    s2 = dynamics_step(s, scale_action((-1.0, 1.0, 0.0)), cfg.dt, cfg)
    print(f"  opposed wheels: yaw {s.yaw:.3f} -> {s2.yaw:.3f} rad (turn in place)")
    s3 = dynamics_step(s, scale_action((1.0, 1.0, 1.0)), cfg.dt, cfg)
    print(f"  tail up: pitch {s.pitch:.4f} -> {s3.pitch:.4f} rad "
          "(tail lags toward its command)")
    print()


def reward_shape():
    print("== reward ==")
    for xy in [(0.0, 0.0), (-50.0, -50.0), (30.0, -40.0)]:
        r = reward(RobotState(xy[0], xy[1], 0.0))
        print(f"  at {xy}: reward {r:+.6f}  (= -0.002 * {math.hypot(*xy):.2f})")
    s = RobotState(10.0, 10.0, 0.0)
    shifted = shift_frame(s, (10.0, 5.0))
    print(f"  shift_frame moves the goal: ({s.x}, {s.y}) seen from (10, 5) "
          f"is ({shifted.x}, {shifted.y}), reward {reward(shifted):+.6f}")
    print()


def scripted_drive():
    print("== scripted drive toward the origin ==")
    env = ScorpionEnv(EnvConfig(horizon=300))
    env.reset(0, init_pose=(60.0, -45.0, 2.5))
    total = 0.0
    for t in range(300):
        obs = env.observation()
        # turn toward the goal, then roll forward: a crude proportional driver
        heading = math.atan2(-env.state.y, -env.state.x)
        err = math.atan2(math.sin(heading - env.state.yaw),
                         math.cos(heading - env.state.yaw))
        turn = max(-1.0, min(1.0, 2.0 * err))
        fwd = 1.0 if abs(err) < 0.5 else 0.2
        _, rew, done, _ = env.step((fwd - 0.5 * turn, fwd + 0.5 * turn, 0.0))
        total += rew
        if t % 60 == 0:
            d = math.hypot(env.state.x, env.state.y)
            print(f"  t={t * 0.1:5.1f}s  position ({env.state.x:+7.2f}, {env.state.y:+7.2f})"
                  f"  distance {d:6.2f}")
    d = math.hypot(env.state.x, env.state.y)
    print(f"  final distance {d:.2f}, episode return {total:.3f}")
    print("  (the learned policy in demo 04 does this from raw observations)")


if __name__ == "__main__":
    np.set_printoptions(precision=4, suppress=True)
    action_pipeline()
    single_steps()
    reward_shape()
    scripted_drive()
