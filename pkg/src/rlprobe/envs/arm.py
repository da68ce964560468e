"""Simplified planar two-link arm tasks: reaching and throwing.

These are deliberately lightweight stand-ins for the torque-controlled arm
benchmarks: per-seed random goals, continuous actions, and (for the multi-goal
variant) a goal id that marks the only rewarded box.  Absolute reward scales
are not comparable to any full-physics simulator; the seed-driven task
structure is the point.
"""

from __future__ import annotations

import math

import numpy as np

from ..core import Continuous, Env, EnvSpec, Flat, Observation
from ..rng import GOAL, INIT_STATE, rng_stream

LINK1 = 0.1
LINK2 = 0.1
VEL_CLAMP = 8.0
TORQUE_GAIN = 20.0
JOINT_DAMPING = 1.0
DT = 0.02


def fingertip(theta1: float, theta2: float):
    """Forward kinematics of the two-link arm (base at the origin)."""
    x = LINK1 * math.cos(theta1) + LINK2 * math.cos(theta1 + theta2)
    y = LINK1 * math.sin(theta1) + LINK2 * math.sin(theta1 + theta2)
    return x, y


def fingertip_velocity(theta1, theta2, dtheta1, dtheta2):
    vx = -LINK1 * math.sin(theta1) * dtheta1 - LINK2 * math.sin(theta1 + theta2) * (dtheta1 + dtheta2)
    vy = LINK1 * math.cos(theta1) * dtheta1 + LINK2 * math.cos(theta1 + theta2) * (dtheta1 + dtheta2)
    return vx, vy


def _clamp(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


class _ArmBase(Env):
    """Shared joint state, reset draws, and torque integration."""

    def __init__(self):
        super().__init__()
        self.theta1 = self.theta2 = self.dtheta1 = self.dtheta2 = 0.0

    def _reset_arm(self, seed: int) -> None:
        init = rng_stream(seed, INIT_STATE)
        self.theta1 = 0.1 * init.uniform(-math.pi, math.pi)
        self.theta2 = 0.1 * init.uniform(-math.pi, math.pi)
        self.dtheta1 = init.uniform(-0.005, 0.005)
        self.dtheta2 = init.uniform(-0.005, 0.005)

    def _integrate_arm(self, torque1: float, torque2: float) -> None:
        acc1 = TORQUE_GAIN * torque1 - JOINT_DAMPING * self.dtheta1
        acc2 = TORQUE_GAIN * torque2 - JOINT_DAMPING * self.dtheta2
        self.theta1 += DT * self.dtheta1
        self.theta2 += DT * self.dtheta2
        self.dtheta1 = _clamp(self.dtheta1 + DT * acc1, -VEL_CLAMP, VEL_CLAMP)
        self.dtheta2 = _clamp(self.dtheta2 + DT * acc2, -VEL_CLAMP, VEL_CLAMP)

    def multiply_state(self, m: float) -> Observation:
        self.theta1 *= m
        self.theta2 *= m
        self.dtheta1 *= m
        self.dtheta2 *= m
        self._after_state_scale()
        return self._observe()

    def _after_state_scale(self) -> None:
        pass


class ReacherEnv(_ArmBase):
    """Reach a per-seed random goal point with the fingertip.

    Reward is -(distance to goal) - 0.1*|action|^2 per step over a fixed
    50-step horizon; the goal is drawn uniformly in the disk of radius 0.19.
    """

    name = "reacher"
    GOAL_RADIUS = 0.19
    MAX_STEPS = 50

    spec = EnvSpec(
        obs_layout=Flat(11),
        action_spec=Continuous(2, (-1.0, -1.0), (1.0, 1.0)),
        max_steps=MAX_STEPS,
        discount=0.99,
    )
    reward_bin_range = (-math.pi, math.pi)

    def __init__(self):
        super().__init__()
        self.goal = (0.0, 0.0)

    def _reset_state(self, seed: int) -> None:
        self._reset_arm(seed)
        g = rng_stream(seed, GOAL)
        radius = self.GOAL_RADIUS * math.sqrt(g.unit())
        angle = g.uniform(0.0, 2.0 * math.pi)
        self.goal = (radius * math.cos(angle), radius * math.sin(angle))

    def _step_state(self, action):
        a1 = _clamp(float(action[0]), -1.0, 1.0)
        a2 = _clamp(float(action[1]), -1.0, 1.0)
        self._integrate_arm(a1, a2)
        tx, ty = fingertip(self.theta1, self.theta2)
        dist = math.hypot(tx - self.goal[0], ty - self.goal[1])
        reward = -dist - 0.1 * (a1 * a1 + a2 * a2)
        return reward, False

    def _observe(self) -> Observation:
        tx, ty = fingertip(self.theta1, self.theta2)
        return Observation(
            np.array(
                [
                    math.cos(self.theta1),
                    math.cos(self.theta2),
                    math.sin(self.theta1),
                    math.sin(self.theta2),
                    self.goal[0],
                    self.goal[1],
                    self.dtheta1,
                    self.dtheta2,
                    tx - self.goal[0],
                    ty - self.goal[1],
                    0.0,
                ],
                dtype=np.float32,
            ),
            Flat(11),
        )

    @property
    def reward_bin_scalar(self) -> float:
        return self.theta1


class ThrowerEnv(_ArmBase):
    """Throw a held ball into a goal box on the ground line.

    Action is (torque1, torque2, release); release > 0 lets go permanently and
    the ball flies ballistically (g scaled to 1) until it sticks on first
    ground contact.  Reward is -(ball-to-goal distance) - 0.05*|torques|^2.
    """

    name = "thrower"
    MAX_STEPS = 100
    GRAVITY = 1.0
    GOAL_HALF_WIDTH = 0.05
    GOAL_X_RANGE = (0.25, 0.95)
    OBS_DIM = 23

    spec = EnvSpec(
        obs_layout=Flat(OBS_DIM),
        action_spec=Continuous(3, (-1.0, -1.0, -1.0), (1.0, 1.0, 1.0)),
        max_steps=MAX_STEPS,
        discount=0.99,
    )
    reward_bin_range = (-1.0, 1.0)

    def __init__(self):
        super().__init__()
        self.ball = [0.0, 0.0]
        self.ball_vel = [0.0, 0.0]
        self.held = True
        self.stuck = False
        self.goal_center = (0.5, 0.0)

    def _draw_goals(self, seed: int) -> None:
        g = rng_stream(seed, GOAL)
        self.goal_center = (g.uniform(*self.GOAL_X_RANGE), 0.0)

    def _reset_state(self, seed: int) -> None:
        self._reset_arm(seed)
        self._draw_goals(seed)
        self.held = True
        self.stuck = False
        self.ball = list(fingertip(self.theta1, self.theta2))
        self.ball_vel = [0.0, 0.0]

    def _active_goal(self):
        return self.goal_center

    def _step_state(self, action):
        t1 = _clamp(float(action[0]), -1.0, 1.0)
        t2 = _clamp(float(action[1]), -1.0, 1.0)
        release = _clamp(float(action[2]), -1.0, 1.0)
        self._integrate_arm(t1, t2)
        if self.held:
            self.ball = list(fingertip(self.theta1, self.theta2))
            self.ball_vel = list(
                fingertip_velocity(self.theta1, self.theta2, self.dtheta1, self.dtheta2)
            )
            if release > 0.0:
                self.held = False  # ball keeps the fingertip velocity it has now
        elif not self.stuck:
            self.ball_vel[1] -= self.GRAVITY * DT
            self.ball[0] += self.ball_vel[0] * DT
            self.ball[1] += self.ball_vel[1] * DT
            if self.ball[1] <= 0.0:
                self.ball[1] = 0.0
                self.ball_vel = [0.0, 0.0]
                self.stuck = True
        gx, gy = self._active_goal()
        dist = math.hypot(self.ball[0] - gx, self.ball[1] - gy)
        reward = -dist - 0.05 * (t1 * t1 + t2 * t2)
        return reward, False

    def _arm_block(self):
        tx, ty = fingertip(self.theta1, self.theta2)
        return [
            math.cos(self.theta1),
            math.cos(self.theta2),
            math.sin(self.theta1),
            math.sin(self.theta2),
            self.dtheta1,
            self.dtheta2,
            tx,
            ty,
            self.ball[0],
            self.ball[1],
            self.ball_vel[0],
            self.ball_vel[1],
            1.0 if self.held else 0.0,
        ]

    def _observe(self) -> Observation:
        gx, gy = self._active_goal()
        vec = self._arm_block() + [
            gx,
            gy,
            self.ball[0] - gx,
            self.ball[1] - gy,
        ] + [0.0] * 6  # padding keeps the published 23-dim layout
        return Observation(np.array(vec, dtype=np.float32), Flat(self.OBS_DIM))

    @property
    def reward_bin_scalar(self) -> float:
        # First observation component: cos(theta1).
        return math.cos(self.theta1)

    def _after_state_scale(self) -> None:
        if self.held:
            self.ball = list(fingertip(self.theta1, self.theta2))


class ThrowerMultiEnv(ThrowerEnv):
    """Thrower with 5 candidate goal boxes; only the flagged one pays reward."""

    name = "thrower-multi"
    N_GOALS = 5
    MIN_GOAL_SEPARATION = 0.15
    MULTI_X_RANGE = (0.2, 1.2)
    MULTI_Y_RANGE = (0.0, 0.3)
    OBS_DIM = 28

    spec = EnvSpec(
        obs_layout=Flat(OBS_DIM),
        action_spec=ThrowerEnv.spec.action_spec,
        max_steps=ThrowerEnv.MAX_STEPS,
        discount=0.99,
    )

    def __init__(self):
        super().__init__()
        self.goals = [(0.0, 0.0)] * self.N_GOALS
        self.active_id = 0

    def _draw_goals(self, seed: int) -> None:
        g = rng_stream(seed, GOAL)
        goals = []
        while len(goals) < self.N_GOALS:
            x = g.uniform(*self.MULTI_X_RANGE)
            y = g.uniform(*self.MULTI_Y_RANGE)
            if all(math.hypot(x - px, y - py) >= self.MIN_GOAL_SEPARATION for px, py in goals):
                goals.append((x, y))
        self.goals = goals
        self.active_id = g.integer(self.N_GOALS)

    def _active_goal(self):
        return self.goals[self.active_id]

    def _observe(self) -> Observation:
        onehot = [0.0] * self.N_GOALS
        onehot[self.active_id] = 1.0
        centers = [c for goal in self.goals for c in goal]
        vec = self._arm_block() + onehot + centers
        return Observation(np.array(vec, dtype=np.float32), Flat(self.OBS_DIM))
