import cmath
import math

import numpy as np
import pytest

from rlprobe.envs.arm import (
    LINK1,
    LINK2,
    ReacherEnv,
    ThrowerEnv,
    ThrowerMultiEnv,
    fingertip,
    fingertip_velocity,
)
from rlprobe.rng import rng_stream


def test_forward_kinematics_vs_complex_arithmetic():
    stream = rng_stream(0, 50)
    for _ in range(1000):
        t1 = stream.uniform(-math.pi, math.pi)
        t2 = stream.uniform(-math.pi, math.pi)
        z = LINK1 * cmath.exp(1j * t1) + LINK2 * cmath.exp(1j * (t1 + t2))
        x, y = fingertip(t1, t2)
        assert abs(x - z.real) < 1e-12
        assert abs(y - z.imag) < 1e-12


def test_reacher_observation_dimension():
    obs = ReacherEnv().reset(0)
    assert obs.data.shape == (11,)
    assert obs.data[10] == 0.0


def test_reacher_goal_deterministic_per_seed():
    a = ReacherEnv()
    b = ReacherEnv()
    a.reset(17)
    b.reset(17)
    assert a.goal == b.goal
    a.reset(18)
    assert a.goal != b.goal


def test_reacher_goals_inside_disk():
    env = ReacherEnv()
    for seed in range(10_000):
        env.reset(seed)
        assert math.hypot(*env.goal) <= 0.19 + 1e-12


def test_reacher_reward_zero_at_goal_with_zero_action():
    env = ReacherEnv()
    env.reset(0)
    env.theta1 = env.theta2 = 0.0
    env.dtheta1 = env.dtheta2 = 0.0
    env.goal = fingertip(0.0, 0.0)
    _, reward, _ = env.step(np.zeros(2))
    assert reward == 0.0


def test_reacher_reward_never_positive():
    env = ReacherEnv()
    stream = rng_stream(1, 60)
    env.reset(1)
    while not env.done:
        a = stream.uniform_vec(-1.0, 1.0, 2)
        _, reward, _ = env.step(a)
        assert reward <= 0.0


def test_reacher_fixed_horizon():
    env = ReacherEnv()
    env.reset(4)
    steps = 0
    while not env.done:
        env.step(np.zeros(2))
        steps += 1
    assert steps == 50


def test_thrower_held_ball_tracks_fingertip():
    env = ThrowerEnv()
    stream = rng_stream(2, 60)
    env.reset(2)
    for _ in range(100):
        torque = stream.uniform_vec(-1.0, 1.0, 2)
        env.step([torque[0], torque[1], -1.0])  # never release
        tip = fingertip(env.theta1, env.theta2)
        assert env.held
        assert abs(env.ball[0] - tip[0]) < 1e-12
        assert abs(env.ball[1] - tip[1]) < 1e-12
        if env.done:
            break


def test_thrower_ballistic_conserves_horizontal_velocity():
    env = ThrowerEnv()
    env.reset(0)
    # spin up, then release and watch the free flight
    for _ in range(10):
        env.step([1.0, 0.5, -1.0])
    env.step([0.0, 0.0, 1.0])  # release
    assert not env.held
    vx0 = env.ball_vel[0]
    while not env.stuck and not env.done:
        env.step([0.0, 0.0, 0.0])
        if not env.stuck:
            assert env.ball_vel[0] == vx0


def test_thrower_ball_sticks_on_ground_contact():
    env = ThrowerEnv()
    env.reset(0)
    for _ in range(10):
        env.step([1.0, 0.5, -1.0])
    env.step([0.0, 0.0, 1.0])
    while not env.stuck and not env.done:
        env.step([0.0, 0.0, 0.0])
    assert env.stuck
    resting = tuple(env.ball)
    assert resting[1] == 0.0
    for _ in range(5):
        if env.done:
            break
        env.step([0.3, -0.3, 0.0])
        assert tuple(env.ball) == resting


def test_thrower_distance_bound_inside_goal_box():
    env = ThrowerEnv()
    env.reset(0)
    gx, gy = env.goal_center
    env.held = False
    env.stuck = True
    env.ball = [gx + 0.05, gy + 0.05]  # box corner, worst case
    _, reward, _ = env.step([0.0, 0.0, 0.0])
    assert reward >= -(0.05 * math.sqrt(2.0)) - 1e-12


def test_thrower_observation_dimension_and_padding():
    obs = ThrowerEnv().reset(3)
    assert obs.data.shape == (23,)
    np.testing.assert_array_equal(obs.data[-6:], np.zeros(6))


def test_thrower_goal_deterministic():
    a = ThrowerEnv()
    b = ThrowerEnv()
    a.reset(9)
    b.reset(9)
    assert a.goal_center == b.goal_center


def test_thrower_fixed_horizon():
    env = ThrowerEnv()
    env.reset(1)
    steps = 0
    while not env.done:
        env.step([0.0, 0.0, -1.0])
        steps += 1
    assert steps == 100


def test_multi_observation_layout():
    env = ThrowerMultiEnv()
    obs = env.reset(5)
    assert obs.data.shape == (28,)
    onehot = obs.data[13:18]
    assert onehot.sum() == 1.0
    assert onehot[env.active_id] == 1.0
    centers = obs.data[18:].reshape(5, 2)
    for (cx, cy), goal in zip(centers, env.goals):
        assert abs(cx - goal[0]) < 1e-6
        assert abs(cy - goal[1]) < 1e-6


def test_multi_goal_separation_and_id_distribution():
    env = ThrowerMultiEnv()
    counts = np.zeros(5)
    for seed in range(10_000):
        env.reset(seed)
        counts[env.active_id] += 1
        if seed < 500:
            for i in range(5):
                for j in range(i + 1, 5):
                    d = math.hypot(env.goals[i][0] - env.goals[j][0],
                                   env.goals[i][1] - env.goals[j][1])
                    assert d >= 0.15
    freqs = counts / 10_000
    assert np.all(np.abs(freqs - 0.2) < 0.02)


def test_multi_reward_ignores_inactive_goals():
    a = ThrowerMultiEnv()
    b = ThrowerMultiEnv()
    a.reset(7)
    b.reset(7)
    # permute the inactive goals in b; the reward sequence must not move
    inactive = [i for i in range(5) if i != b.active_id]
    goals = list(b.goals)
    goals[inactive[0]], goals[inactive[1]] = goals[inactive[1]], goals[inactive[0]]
    goals[inactive[2]], goals[inactive[3]] = goals[inactive[3]], goals[inactive[2]]
    b.goals = goals
    stream = rng_stream(3, 61)
    for _ in range(60):
        act = stream.uniform_vec(-1.0, 1.0, 3)
        _, ra, _ = a.step(act)
        _, rb, _ = b.step(act)
        assert ra == rb


def test_goal_placement_independent_of_actions():
    env = ThrowerMultiEnv()
    env.reset(11)
    first = (list(env.goals), env.active_id)
    stream = rng_stream(4, 62)
    for _ in range(40):
        env.step(stream.uniform_vec(-1.0, 1.0, 3))
    env.reset(11)
    assert (list(env.goals), env.active_id) == first


def test_velocity_clamp():
    env = ReacherEnv()
    env.reset(0)
    for _ in range(50):
        env.step([1.0, 1.0])
        assert abs(env.dtheta1) <= 8.0
        assert abs(env.dtheta2) <= 8.0
        if env.done:
            break


def test_fingertip_velocity_matches_numeric_derivative():
    t1, t2, d1, d2 = 0.3, -0.8, 1.5, -2.0
    h = 1e-7
    x0, y0 = fingertip(t1, t2)
    x1, y1 = fingertip(t1 + h * d1, t2 + h * d2)
    vx, vy = fingertip_velocity(t1, t2, d1, d2)
    assert abs((x1 - x0) / h - vx) < 1e-5
    assert abs((y1 - y0) / h - vy) < 1e-5
