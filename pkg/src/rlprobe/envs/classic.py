"""Native Cartpole and Acrobot dynamics plus a deterministic raster renderer.

Dynamics constants are pinned to the classic control formulations so that
hand-integrated oracles can check single steps exactly.  The pixel variants
render 64x64 grayscale frames and stack consecutive frames along channels so
velocities stay observable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Discrete, Env, EnvSpec, Flat, Image, Observation
from ..rng import INIT_STATE, rng_stream

TWELVE_DEG = 12.0 * math.pi / 180.0


class CartpoleEnv(Env):
    """Cart-pole balancing: force +-10 N, Euler integration at dt = 0.02.

    Reward is +1 per step while the pole stays within 12 degrees and the cart
    within +-2.4 m, so episode return equals episode length.
    """

    name = "cartpole"
    GRAVITY = 9.8
    MASS_CART = 1.0
    MASS_POLE = 0.1
    TOTAL_MASS = MASS_CART + MASS_POLE
    HALF_LENGTH = 0.5
    POLE_MASS_LENGTH = MASS_POLE * HALF_LENGTH
    FORCE = 10.0
    DT = 0.02
    X_LIMIT = 2.4
    THETA_LIMIT = TWELVE_DEG

    spec = EnvSpec(obs_layout=Flat(4), action_spec=Discrete(2), max_steps=200, discount=0.995)
    reward_bin_range = (-TWELVE_DEG, TWELVE_DEG)

    def __init__(self):
        super().__init__()
        self.x = self.x_dot = self.theta = self.theta_dot = 0.0

    def _reset_state(self, seed: int) -> None:
        draw = rng_stream(seed, INIT_STATE).uniform_vec(-0.05, 0.05, 4)
        self.x, self.x_dot, self.theta, self.theta_dot = (float(v) for v in draw)

    def _step_state(self, action):
        if action not in (0, 1):
            raise ValueError(f"cartpole action must be 0 (left) or 1 (right), got {action!r}")
        force = self.FORCE if action == 1 else -self.FORCE
        cos_t = math.cos(self.theta)
        sin_t = math.sin(self.theta)
        temp = (force + self.POLE_MASS_LENGTH * self.theta_dot**2 * sin_t) / self.TOTAL_MASS
        theta_acc = (self.GRAVITY * sin_t - cos_t * temp) / (
            self.HALF_LENGTH * (4.0 / 3.0 - self.MASS_POLE * cos_t**2 / self.TOTAL_MASS)
        )
        x_acc = temp - self.POLE_MASS_LENGTH * theta_acc * cos_t / self.TOTAL_MASS
        # Semi-implicit ordering: positions advance on the old velocities.
        self.x += self.DT * self.x_dot
        self.x_dot += self.DT * x_acc
        self.theta += self.DT * self.theta_dot
        self.theta_dot += self.DT * theta_acc
        dead = abs(self.x) > self.X_LIMIT or abs(self.theta) > self.THETA_LIMIT
        return 1.0, dead

    def _observe(self) -> Observation:
        return Observation(
            np.array([self.x, self.x_dot, self.theta, self.theta_dot], dtype=np.float32),
            Flat(4),
        )

    @property
    def reward_bin_scalar(self) -> float:
        return self.theta

    def multiply_state(self, m: float) -> Observation:
        self.x *= m
        self.x_dot *= m
        self.theta *= m
        self.theta_dot *= m
        return self._observe()

    def state_tuple(self):
        return (self.x, self.x_dot, self.theta, self.theta_dot)


def _wrap_pi(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


class AcrobotEnv(Env):
    """Two-link underactuated pendulum; torque {-1, 0, +1} on the inner joint.

    RK4 integration at dt = 0.2 over the standard unit-mass, unit-length
    formulation; reward -1 per step until the tip height -cos(t1)-cos(t1+t2)
    exceeds 1.
    """

    name = "acrobot"
    G = 9.8
    M1 = M2 = 1.0
    L1 = 1.0
    LC1 = LC2 = 0.5
    I1 = I2 = 1.0
    DT = 0.2
    MAX_VEL1 = 4.0 * math.pi
    MAX_VEL2 = 9.0 * math.pi

    spec = EnvSpec(obs_layout=Flat(6), action_spec=Discrete(3), max_steps=200, discount=0.99)
    reward_bin_range = (-math.pi, math.pi)

    def __init__(self):
        super().__init__()
        self.theta1 = self.theta2 = self.dtheta1 = self.dtheta2 = 0.0

    def _reset_state(self, seed: int) -> None:
        draw = rng_stream(seed, INIT_STATE).uniform_vec(-0.1, 0.1, 4)
        self.theta1, self.theta2, self.dtheta1, self.dtheta2 = (float(v) for v in draw)

    def _dsdt(self, t1, t2, d1v, d2v, torque):
        m1, m2, l1, lc1, lc2, i1, i2, g = (
            self.M1, self.M2, self.L1, self.LC1, self.LC2, self.I1, self.I2, self.G,
        )
        cos2 = math.cos(t2)
        sin2 = math.sin(t2)
        d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * cos2) + i1 + i2
        d2 = m2 * (lc2**2 + l1 * lc2 * cos2) + i2
        phi2 = m2 * lc2 * g * math.cos(t1 + t2 - math.pi / 2.0)
        phi1 = (
            -m2 * l1 * lc2 * d2v**2 * sin2
            - 2 * m2 * l1 * lc2 * d2v * d1v * sin2
            + (m1 * lc1 + m2 * l1) * g * math.cos(t1 - math.pi / 2.0)
            + phi2
        )
        ddtheta2 = (
            torque + d2 / d1 * phi1 - m2 * l1 * lc2 * d1v**2 * sin2 - phi2
        ) / (m2 * lc2**2 + i2 - d2**2 / d1)
        ddtheta1 = -(d2 * ddtheta2 + phi1) / d1
        return d1v, d2v, ddtheta1, ddtheta2

    def _step_state(self, action):
        if action not in (0, 1, 2):
            raise ValueError(f"acrobot action must be 0, 1 or 2, got {action!r}")
        torque = float(action) - 1.0
        s = (self.theta1, self.theta2, self.dtheta1, self.dtheta2)
        dt = self.DT
        k1 = self._dsdt(*s, torque)
        k2 = self._dsdt(*(si + dt / 2 * ki for si, ki in zip(s, k1)), torque)
        k3 = self._dsdt(*(si + dt / 2 * ki for si, ki in zip(s, k2)), torque)
        k4 = self._dsdt(*(si + dt * ki for si, ki in zip(s, k3)), torque)
        t1, t2, d1v, d2v = (
            si + dt / 6.0 * (a + 2 * b + 2 * c + d)
            for si, a, b, c, d in zip(s, k1, k2, k3, k4)
        )
        self.theta1 = _wrap_pi(t1)
        self.theta2 = _wrap_pi(t2)
        self.dtheta1 = min(max(d1v, -self.MAX_VEL1), self.MAX_VEL1)
        self.dtheta2 = min(max(d2v, -self.MAX_VEL2), self.MAX_VEL2)
        solved = -math.cos(self.theta1) - math.cos(self.theta1 + self.theta2) > 1.0
        return -1.0, solved

    def _observe(self) -> Observation:
        return Observation(
            np.array(
                [
                    math.cos(self.theta1),
                    math.sin(self.theta1),
                    math.cos(self.theta2),
                    math.sin(self.theta2),
                    self.dtheta1,
                    self.dtheta2,
                ],
                dtype=np.float32,
            ),
            Flat(6),
        )

    @property
    def reward_bin_scalar(self) -> float:
        return self.theta1

    def multiply_state(self, m: float) -> Observation:
        self.theta1 *= m
        self.theta2 *= m
        self.dtheta1 *= m
        self.dtheta2 *= m
        return self._observe()

    def state_tuple(self):
        return (self.theta1, self.theta2, self.dtheta1, self.dtheta2)


# ---------------------------------------------------------------------------
# Rasterization


@dataclass(frozen=True)
class RenderConfig:
    """Raster geometry for the pixel variants."""

    width: int = 64
    height: int = 64
    levels: int = 256
    stack_depth: int = 2

    def __post_init__(self):
        if self.stack_depth < 2:
            raise ValueError("stack_depth must be >= 2 for velocity observability")
        if self.levels < 2:
            raise ValueError("need at least 2 grayscale levels")


def _draw_line(buf: np.ndarray, r0: int, c0: int, r1: int, c1: int, value: int) -> None:
    """Bresenham segment, no anti-aliasing; clips to the buffer."""
    h, w = buf.shape
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dc - dr
    r, c = r0, c0
    while True:
        if 0 <= r < h and 0 <= c < w:
            buf[r, c] = value
        if r == r1 and c == c1:
            break
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr


def render_cartpole(state, config: RenderConfig = RenderConfig()) -> np.ndarray:
    """Grayscale frame: cart as filled rectangle, pole as a line segment."""
    x, _, theta, _ = state
    buf = np.zeros((config.height, config.width), dtype=np.uint8)
    fg = config.levels - 1
    mid = config.levels // 2
    px_per_unit = config.width / 5.0
    cart_col = int(round(config.width / 2.0 + x * px_per_unit))
    cart_row = int(round(config.height * 0.75))
    half_w = max(2, config.width // 16)
    half_h = max(1, config.height // 32)
    r0, r1 = max(0, cart_row - half_h), min(config.height, cart_row + half_h + 1)
    c0, c1 = max(0, cart_col - half_w), min(config.width, cart_col + half_w + 1)
    buf[r0:r1, c0:c1] = mid
    pole_px = 2.0 * px_per_unit  # drawn at double length for angular resolution
    tip_col = int(round(cart_col + pole_px * math.sin(theta)))
    tip_row = int(round(cart_row - half_h - pole_px * math.cos(theta)))
    _draw_line(buf, cart_row - half_h, cart_col, tip_row, tip_col, fg)
    return buf


def render_acrobot(state, config: RenderConfig = RenderConfig()) -> np.ndarray:
    """Grayscale frame: both links drawn from the fixed center pivot."""
    theta1, theta2, _, _ = state
    buf = np.zeros((config.height, config.width), dtype=np.uint8)
    fg = config.levels - 1
    mid = (config.levels * 3) // 4
    scale = (min(config.width, config.height) / 2.0 - 2.0) / 2.05
    pr = config.height // 2
    pc = config.width // 2
    # Link angles measured from the downward vertical.
    j1_r = int(round(pr + scale * math.cos(theta1)))
    j1_c = int(round(pc + scale * math.sin(theta1)))
    tip_r = int(round(j1_r + scale * math.cos(theta1 + theta2)))
    tip_c = int(round(j1_c + scale * math.sin(theta1 + theta2)))
    _draw_line(buf, pr, pc, j1_r, j1_c, fg)
    _draw_line(buf, j1_r, j1_c, tip_r, tip_c, mid)
    return buf


def frame_stack(frames, depth: int) -> np.ndarray:
    """Concatenate the last `depth` frames along a new channel axis.

    At episode start the earliest frame is repeated to fill the stack.
    """
    if not frames:
        raise ValueError("frame_stack needs at least one frame")
    recent = list(frames[-depth:])
    while len(recent) < depth:
        recent.insert(0, recent[0])
    return np.stack(recent, axis=0)


def write_pgm(path, frame: np.ndarray) -> None:
    """Binary PGM (P5) debug dump of a single grayscale frame."""
    frame = np.asarray(frame, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{frame.shape[1]} {frame.shape[0]}\n255\n".encode("ascii"))
        fh.write(frame.tobytes())


class _PixelEnv(Env):
    """Pixel wrapper over a state env: render, stack, normalize to [0, 1]."""

    def __init__(self, inner: Env, render_fn, config: RenderConfig = RenderConfig()):
        super().__init__()
        self._inner = inner
        self._render = render_fn
        self.config = config
        layout = Image(config.stack_depth, config.height, config.width)
        self.spec = EnvSpec(
            obs_layout=layout,
            action_spec=inner.spec.action_spec,
            max_steps=inner.spec.max_steps,
            discount=0.99,
        )
        self._frames = []

    @property
    def reward_bin_scalar(self) -> float:
        return self._inner.reward_bin_scalar

    def _reset_state(self, seed: int) -> None:
        self._inner.reset(seed)
        self._frames = [self._render(self._inner.state_tuple(), self.config)]

    def _step_state(self, action):
        _, reward, done = self._inner.step(action)
        self._frames.append(self._render(self._inner.state_tuple(), self.config))
        if len(self._frames) > self.config.stack_depth:
            self._frames = self._frames[-self.config.stack_depth:]
        return reward, done

    def _observe(self) -> Observation:
        stacked = frame_stack(self._frames, self.config.stack_depth)
        data = stacked.astype(np.float32) / float(self.config.levels - 1)
        return Observation(data.ravel(), self.spec.obs_layout)

    def latest_frame(self) -> np.ndarray:
        return self._frames[-1]


class PixelCartpoleEnv(_PixelEnv):
    name = "cartpole-pixels"
    reward_bin_range = CartpoleEnv.reward_bin_range

    def __init__(self, config: RenderConfig = RenderConfig()):
        super().__init__(CartpoleEnv(), render_cartpole, config)


class PixelAcrobotEnv(_PixelEnv):
    name = "acrobot-pixels"
    reward_bin_range = AcrobotEnv.reward_bin_range

    def __init__(self, config: RenderConfig = RenderConfig()):
        super().__init__(AcrobotEnv(), render_acrobot, config)
