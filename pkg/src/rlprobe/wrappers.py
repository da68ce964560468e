"""Environment decorators for the three perturbation protocols.

* randomized reward: bin one state scalar into k bins and multiply rewards in
  randomly selected bins by per-seed multipliers (the memorization probe);
* Gaussian observation noise at evaluation time;
* initial-state multiplier at evaluation time.

Identity settings (p_rand=0, sigma^2=0, m=1) are explicit shortcuts so a
wrapped env replays trajectories bitwise identical to the bare env.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Env, Image, Observation
from .rng import OBS_NOISE, REWARD_RAND, RandomStream, rng_stream


@dataclass(frozen=True)
class RandomizedRewardConfig:
    k: int = 3
    p_rand: float = 0.0
    bin_range: tuple = (-1.0, 1.0)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("bin count must be >= 1")
        if not 0.0 <= self.p_rand <= 1.0:
            raise ValueError("p_rand must lie in [0, 1]")
        lo, hi = self.bin_range
        if not lo < hi:
            raise ValueError("bin_range must have lo < hi")


@dataclass(frozen=True)
class BinTable:
    """Per-episode-seed randomization table: k flags plus k multipliers."""

    randomized: tuple
    beta: tuple


def build_bin_table(seed: int, config: RandomizedRewardConfig) -> BinTable:
    """Deterministic table for one episode seed.

    The multiplier of every bin is drawn unconditionally (even when the bin is
    not randomized) so sweeping p_rand reveals multipliers without reshuffling
    them: the same seed sees the same beta at every p_rand.
    """
    stream = rng_stream(seed, REWARD_RAND)
    randomized = []
    beta = []
    for _ in range(config.k):
        randomized.append(stream.unit() < config.p_rand)
        beta.append(stream.uniform(-1.0, 1.0))
    return BinTable(tuple(randomized), tuple(beta))


def bin_index(state_scalar: float, config: RandomizedRewardConfig) -> int:
    """Out-of-range scalars clamp into the edge bins."""
    if not math.isfinite(state_scalar):
        raise ValueError(f"cannot bin non-finite state scalar {state_scalar!r}")
    lo, hi = config.bin_range
    raw = math.floor((state_scalar - lo) * config.k / (hi - lo))
    return min(max(raw, 0), config.k - 1)


def randomize_reward(raw_reward: float, state_scalar: float, table: BinTable,
                     config: RandomizedRewardConfig) -> float:
    b = bin_index(state_scalar, config)
    if table.randomized[b]:
        return table.beta[b] * raw_reward
    return raw_reward


class RandomizedRewardEnv(Env):
    """Training-time wrapper multiplying rewards in randomized bins.

    The bin is read from the state in which the action was taken, matching
    the R(s, a) convention of the base MDP.
    """

    def __init__(self, inner: Env, config: RandomizedRewardConfig):
        super().__init__()
        if inner.reward_bin_range is None:
            raise ValueError(f"{inner.name} has no registered reward bin dimension")
        self._inner = inner
        self.config = config
        self.spec = inner.spec
        self.name = inner.name + "+randreward"
        self._table: Optional[BinTable] = None

    @property
    def table(self) -> BinTable:
        return self._table

    def reset(self, seed: int) -> Observation:
        self._steps = 0
        self._done = False
        self._table = build_bin_table(seed, self.config)
        return self._inner.reset(seed)

    def step(self, action):
        pre_scalar = self._inner.reward_bin_scalar
        obs, reward, done = self._inner.step(action)
        if self.config.p_rand > 0.0:
            reward = randomize_reward(reward, pre_scalar, self._table, self.config)
        self._steps = self._inner.steps_taken
        self._done = done
        return obs, reward, done

    def multiply_state(self, m: float) -> Observation:
        return self._inner.multiply_state(m)

    @property
    def reward_bin_scalar(self) -> float:
        return self._inner.reward_bin_scalar


def reward_config_for(env: Env, k: int, p_rand: float) -> RandomizedRewardConfig:
    """Pin the binned dimension and range from the env's registration."""
    if env.reward_bin_range is None:
        raise ValueError(f"{env.name} has no registered reward bin dimension")
    return RandomizedRewardConfig(k=k, p_rand=p_rand, bin_range=env.reward_bin_range)


@dataclass(frozen=True)
class NoiseConfig:
    variance: float = 0.0

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("noise variance must be >= 0")


def noisy_observe(obs: Observation, config: NoiseConfig, stream: RandomStream) -> Observation:
    """Perturb every flat component (pixel included) by independent Gaussians."""
    if config.variance == 0.0:
        return obs
    noise = stream.gaussian_vec(0.0, config.variance, obs.data.size)
    return Observation((obs.data.astype(np.float64) + noise).astype(np.float32), obs.layout)


class NoisyObservationEnv(Env):
    """Evaluation-time wrapper: the agent's view is noisy, the env state is not."""

    def __init__(self, inner: Env, config: NoiseConfig):
        super().__init__()
        self._inner = inner
        self.config = config
        self.spec = inner.spec
        self.name = inner.name + "+obsnoise"
        self._stream: Optional[RandomStream] = None

    def reset(self, seed: int) -> Observation:
        self._steps = 0
        self._done = False
        self._stream = rng_stream(seed, OBS_NOISE)
        return noisy_observe(self._inner.reset(seed), self.config, self._stream)

    def step(self, action):
        obs, reward, done = self._inner.step(action)
        self._steps = self._inner.steps_taken
        self._done = done
        return noisy_observe(obs, self.config, self._stream), reward, done

    def multiply_state(self, m: float) -> Observation:
        return noisy_observe(self._inner.multiply_state(m), self.config, self._stream)

    @property
    def reward_bin_scalar(self) -> float:
        return self._inner.reward_bin_scalar


@dataclass(frozen=True)
class MultiplierConfig:
    m: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("initial-state multiplier must be positive")


class InitialStateMultiplierEnv(Env):
    """Evaluation-time wrapper scaling the freshly drawn initial state by m."""

    def __init__(self, inner: Env, config: MultiplierConfig):
        super().__init__()
        if isinstance(inner.spec.obs_layout, Image):
            raise ValueError("initial-state multiplier is undefined for image observations")
        self._inner = inner
        self.config = config
        self.spec = inner.spec
        self.name = inner.name + "+initmult"

    def reset(self, seed: int) -> Observation:
        self._steps = 0
        self._done = False
        obs = self._inner.reset(seed)
        if self.config.m != 1.0:
            obs = self._inner.multiply_state(self.config.m)
        return obs

    def step(self, action):
        obs, reward, done = self._inner.step(action)
        self._steps = self._inner.steps_taken
        self._done = done
        return obs, reward, done

    @property
    def reward_bin_scalar(self) -> float:
        return self._inner.reward_bin_scalar
