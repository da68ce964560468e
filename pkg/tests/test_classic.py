import hashlib
import math

import numpy as np
import pytest

from rlprobe.core import EpisodeDoneError
from rlprobe.envs.classic import (
    AcrobotEnv,
    CartpoleEnv,
    PixelCartpoleEnv,
    RenderConfig,
    frame_stack,
    render_acrobot,
    render_cartpole,
    write_pgm,
)
from rlprobe.rng import rng_stream


def test_cartpole_reset_deterministic():
    a = CartpoleEnv().reset(42)
    b = CartpoleEnv().reset(42)
    np.testing.assert_array_equal(a.data, b.data)


def test_cartpole_reset_distribution():
    env = CartpoleEnv()
    states = np.array([env.reset(seed).data for seed in range(10_000)])
    assert states.min() >= -0.05 and states.max() <= 0.05
    # std of the mean = (0.1/sqrt(12))/100 = 2.9e-4; 0.002 is ~7 sigma
    assert np.all(np.abs(states.mean(axis=0)) < 0.002)


def _hand_euler_step(state, force):
    """Independent re-derivation of one cartpole Euler step."""
    x, x_dot, theta, theta_dot = state
    g, mc, mp, half, tau = 9.8, 1.0, 0.1, 0.5, 0.02
    total = mc + mp
    pml = mp * half
    temp = (force + pml * theta_dot**2 * math.sin(theta)) / total
    theta_acc = (g * math.sin(theta) - math.cos(theta) * temp) / (
        half * (4.0 / 3.0 - mp * math.cos(theta) ** 2 / total)
    )
    x_acc = temp - pml * theta_acc * math.cos(theta) / total
    return (x + tau * x_dot, x_dot + tau * x_acc,
            theta + tau * theta_dot, theta_dot + tau * theta_acc)


def test_cartpole_step_matches_hand_integration():
    env = CartpoleEnv()
    env.reset(0)
    env.x = env.x_dot = env.theta = env.theta_dot = 0.0
    obs, reward, done = env.step(1)
    np.testing.assert_allclose(obs.data, [0.0, 0.19512195, 0.0, -0.29268292],
                               atol=1e-7)
    assert reward == 1.0 and not done
    # several steps against the independent oracle
    env.reset(3)
    state = env.state_tuple()
    for action in [1, 0, 0, 1, 1, 0]:
        env.step(action)
        state = _hand_euler_step(state, 10.0 if action else -10.0)
        np.testing.assert_allclose(env.state_tuple(), state, atol=1e-12)


def test_cartpole_left_mirrors_right():
    right = CartpoleEnv()
    right.reset(0)
    right.x = right.x_dot = right.theta = right.theta_dot = 0.0
    left = CartpoleEnv()
    left.reset(0)
    left.x = left.x_dot = left.theta = left.theta_dot = 0.0
    ro, _, _ = right.step(1)
    lo, _, _ = left.step(0)
    np.testing.assert_allclose(lo.data, -ro.data, atol=1e-12)


def test_cartpole_mirror_symmetry_sequences():
    a = CartpoleEnv()
    a.reset(0)
    a.x = a.x_dot = a.theta = a.theta_dot = 0.0
    b = CartpoleEnv()
    b.reset(0)
    b.x = b.x_dot = b.theta = b.theta_dot = 0.0
    for act_a, act_b in [(1, 0), (0, 1), (0, 1), (1, 0)]:
        a.step(act_a)
        b.step(act_b)
    assert abs(a.x + b.x) < 1e-9
    assert abs(a.theta + b.theta) < 1e-9


def test_cartpole_large_angle_terminates_immediately():
    env = CartpoleEnv()
    env.reset(0)
    env.theta = 0.22  # beyond the 12-degree limit
    env.theta_dot = 0.0
    _, _, done = env.step(1)
    assert done


def test_stepping_done_episode_raises():
    env = CartpoleEnv()
    env.reset(0)
    env.theta = 0.5
    env.step(1)
    with pytest.raises(EpisodeDoneError):
        env.step(1)


def test_cartpole_return_equals_episode_length():
    env = CartpoleEnv()
    stream = rng_stream(7, 99)
    env.reset(7)
    total, steps = 0.0, 0
    while True:
        _, r, done = env.step(stream.integer(2))
        total += r
        steps += 1
        if done:
            break
    assert total == steps
    assert steps <= 200


def test_acrobot_reward_and_cap():
    env = AcrobotEnv()
    env.reset(1)
    total, steps = 0.0, 0
    while True:
        _, r, done = env.step(1)  # zero torque forever: never solves
        assert r == -1.0
        total += r
        steps += 1
        if done:
            break
    assert steps == 200
    assert total == -200.0


def test_acrobot_rest_state_is_equilibrium():
    env = AcrobotEnv()
    env.reset(0)
    env.theta1 = env.theta2 = env.dtheta1 = env.dtheta2 = 0.0
    for _ in range(5):
        env.step(1)
    assert all(abs(v) < 1e-12 for v in env.state_tuple())


def test_acrobot_observation_trig_identity():
    env = AcrobotEnv()
    stream = rng_stream(5, 99)
    obs = env.reset(5)
    for _ in range(150):
        if env.done:
            obs = env.reset(stream.integer(50))
        obs, _, _ = env.step(stream.integer(3))
        c1, s1, c2, s2 = obs.data[:4]
        assert abs(c1 * c1 + s1 * s1 - 1.0) < 1e-6  # float32 storage
        assert abs(c2 * c2 + s2 * s2 - 1.0) < 1e-6


def test_acrobot_velocity_clamps():
    env = AcrobotEnv()
    env.reset(0)
    for _ in range(199):
        env.step(2)
        assert abs(env.dtheta1) <= 4 * math.pi + 1e-12
        assert abs(env.dtheta2) <= 9 * math.pi + 1e-12
        if env.done:
            break


def test_render_deterministic_and_position_sensitive():
    s0 = (0.0, 0.0, 0.05, 0.0)
    a = render_cartpole(s0)
    b = render_cartpole(s0)
    np.testing.assert_array_equal(a, b)
    shifted = render_cartpole((1.0, 0.0, 0.05, 0.0))
    assert not np.array_equal(a, shifted)
    cols_a = np.where(a.any(axis=0))[0]
    cols_b = np.where(shifted.any(axis=0))[0]
    assert cols_b.mean() > cols_a.mean()


def test_render_golden_checksums():
    # frozen rasters: renderer output depends only on (state, config)
    a = hashlib.sha256(render_cartpole((0.3, 0.0, -0.1, 0.0)).tobytes()).hexdigest()
    b = hashlib.sha256(render_acrobot((0.4, -0.2, 0.0, 0.0)).tobytes()).hexdigest()
    assert a == "1f2354701940b5c4a385331e05c2176ad11b2ff7b2ebbbebf6b02137a0feffa3"
    assert b == "c2a323ab4aa78876476c29f3439bea5403e7fb1881c24674a421271617d9982b"


def test_frame_stack_pads_first_frame():
    f0 = np.ones((4, 4), dtype=np.uint8)
    stacked = frame_stack([f0], 2)
    np.testing.assert_array_equal(stacked[0], stacked[1])
    f1 = np.zeros((4, 4), dtype=np.uint8)
    stacked = frame_stack([f0, f1], 2)
    np.testing.assert_array_equal(stacked[0], f0)
    np.testing.assert_array_equal(stacked[1], f1)


def test_pixel_env_stack_and_range():
    env = PixelCartpoleEnv()
    obs = env.reset(0)
    layout = env.spec.obs_layout
    assert (layout.channels, layout.height, layout.width) == (2, 64, 64)
    frames = obs.data.reshape(2, 64, 64)
    np.testing.assert_array_equal(frames[0], frames[1])  # padding at t=0
    assert obs.data.min() >= 0.0 and obs.data.max() <= 1.0
    # one step moves sub-pixel; twenty steps of constant push move the cart
    # several pixels, so the stacked frames must change
    for _ in range(20):
        obs2, _, done = env.step(1)
        if done:
            break
    assert not np.array_equal(obs2.data, obs.data)


def test_pgm_roundtrip(tmp_path):
    frame = render_cartpole((0.0, 0.0, 0.0, 0.0))
    path = tmp_path / "frame.pgm"
    write_pgm(path, frame)
    blob = path.read_bytes()
    assert blob.startswith(b"P5\n64 64\n255\n")
    parsed = np.frombuffer(blob[len(b"P5\n64 64\n255\n"):], dtype=np.uint8)
    np.testing.assert_array_equal(parsed.reshape(64, 64), frame)


def test_render_config_validation():
    with pytest.raises(ValueError):
        RenderConfig(stack_depth=1)
    with pytest.raises(ValueError):
        RenderConfig(levels=1)
