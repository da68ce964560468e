"""Environment contract: observation/action types, seed protocol, env base class.

All environments in this package are deterministic state machines whose only
stochasticity enters through an integer episode seed.  The train/test split of
an experiment is therefore a split of seed sets, with test seeds offset by a
fixed constant so disjointness holds by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

TEST_SEED_OFFSET = 1_000_000


@dataclass(frozen=True)
class Discrete:
    """Discrete action set {0, ..., n-1}."""

    n: int

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError(f"Discrete action count must be positive, got {self.n}")


@dataclass(frozen=True)
class Continuous:
    """Box action space with elementwise bounds."""

    dim: int
    low: tuple
    high: tuple

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError(f"Continuous action dim must be positive, got {self.dim}")
        if len(self.low) != self.dim or len(self.high) != self.dim:
            raise ValueError("Continuous bounds must match dim")
        for lo, hi in zip(self.low, self.high):
            if not lo < hi:
                raise ValueError(f"Continuous bounds require low < high, got {lo} >= {hi}")


ActionSpec = Union[Discrete, Continuous]


@dataclass(frozen=True)
class Flat:
    dim: int


@dataclass(frozen=True)
class Image:
    channels: int
    height: int
    width: int


ObsLayout = Union[Flat, Image]


def layout_size(layout: ObsLayout) -> int:
    if isinstance(layout, Flat):
        return layout.dim
    return layout.channels * layout.height * layout.width


@dataclass
class Observation:
    """Flat float vector plus the logical layout it was flattened from."""

    data: np.ndarray
    layout: ObsLayout

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32).ravel()
        if self.data.size != layout_size(self.layout):
            raise ValueError(
                f"observation data length {self.data.size} does not match layout {self.layout}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("observation contains non-finite entries")


@dataclass
class Transition:
    state: np.ndarray
    action: object
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass(frozen=True)
class EnvSpec:
    obs_layout: ObsLayout
    action_spec: ActionSpec
    max_steps: int
    discount: float

    def __post_init__(self):
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")


@dataclass(frozen=True)
class SeedProtocol:
    """Disjoint train/test seed sets; the experiment's only noise source."""

    train_seeds: tuple
    test_seeds: tuple

    def __post_init__(self):
        if len(self.train_seeds) < 1:
            raise ValueError("need at least one train seed")
        if len(set(self.train_seeds)) != len(self.train_seeds):
            raise ValueError("duplicate train seeds")
        if len(set(self.test_seeds)) != len(self.test_seeds):
            raise ValueError("duplicate test seeds")
        if set(self.train_seeds) & set(self.test_seeds):
            raise ValueError("train and test seed sets overlap")

    @property
    def n_train(self) -> int:
        return len(self.train_seeds)

    @property
    def m_test(self) -> int:
        return len(self.test_seeds)

    def train_seed_for_episode(self, episode: int) -> int:
        """Round-robin schedule: equal exposure to every train seed."""
        return self.train_seeds[episode % len(self.train_seeds)]


def make_protocol(n_train: int, m_test: int = 100) -> SeedProtocol:
    """Train seeds [0, n_train); test seeds offset by ``TEST_SEED_OFFSET``."""
    if n_train < 1:
        raise ValueError(f"n_train must be >= 1, got {n_train}")
    if n_train >= TEST_SEED_OFFSET:
        raise ValueError(f"n_train must be < {TEST_SEED_OFFSET} to guarantee disjointness")
    if m_test < 1:
        raise ValueError(f"m_test must be >= 1, got {m_test}")
    return SeedProtocol(
        train_seeds=tuple(range(n_train)),
        test_seeds=tuple(range(TEST_SEED_OFFSET, TEST_SEED_OFFSET + m_test)),
    )


class EpisodeDoneError(RuntimeError):
    """Raised when step() is called on an episode that already ended."""


class Env:
    """Single-owner mutable environment state machine.

    Subclasses set ``spec`` and implement ``_reset_state``, ``_step_state``
    and ``_observe``.  Reward-bin metadata (``reward_bin_range`` plus the
    ``reward_bin_scalar`` property) is only present on envs that support the
    randomized-reward probe.
    """

    spec: EnvSpec
    name: str = "env"
    reward_bin_range: Optional[tuple] = None

    def __init__(self):
        self._steps = 0
        self._done = True

    def reset(self, seed: int) -> Observation:
        self._steps = 0
        self._done = False
        self._reset_state(int(seed))
        return self._observe()

    def step(self, action):
        if self._done:
            raise EpisodeDoneError(f"{self.name}: step() called on a finished episode")
        reward, terminal = self._step_state(action)
        self._steps += 1
        if self._steps >= self.spec.max_steps:
            terminal = True
        self._done = bool(terminal)
        return self._observe(), float(reward), self._done

    @property
    def steps_taken(self) -> int:
        return self._steps

    @property
    def done(self) -> bool:
        return self._done

    @property
    def reward_bin_scalar(self) -> float:
        raise NotImplementedError(f"{self.name} has no registered reward bin dimension")

    def multiply_state(self, m: float) -> Observation:
        """Scale the freshly reset internal state componentwise; returns the new view."""
        raise NotImplementedError(f"{self.name} does not support initial-state scaling")

    # subclass hooks -------------------------------------------------------

    def _reset_state(self, seed: int) -> None:
        raise NotImplementedError

    def _step_state(self, action):
        raise NotImplementedError

    def _observe(self) -> Observation:
        raise NotImplementedError
