"""Ring-buffer experience replay with uniform stream-driven sampling."""

from __future__ import annotations

import numpy as np

from ..rng import RandomStream


class ReplayBuffer:
    """FIFO transition store over preallocated arrays.

    At capacity the oldest transition is evicted; sampling is uniform over
    whatever is currently stored.
    """

    def __init__(self, capacity: int, obs_dim: int):
        if capacity < 1:
            raise ValueError("replay capacity must be >= 1")
        self.capacity = capacity
        self._obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity, dtype=np.float32)
        self._next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self._dones = np.zeros(capacity, dtype=np.float32)
        self._ptr = 0
        self._size = 0

    def push(self, obs, action, reward, next_obs, done) -> None:
        i = self._ptr
        self._obs[i] = obs
        self._actions[i] = action
        self._rewards[i] = reward
        self._next_obs[i] = next_obs
        self._dones[i] = 1.0 if done else 0.0
        self._ptr = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def __len__(self) -> int:
        return self._size

    def sample(self, batch_size: int, stream: RandomStream):
        if self._size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = stream.index_vec(self._size, batch_size)
        return (
            self._obs[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next_obs[idx],
            self._dones[idx],
        )

    def stored_rewards(self) -> np.ndarray:
        """Rewards currently held, oldest first (for FIFO property tests)."""
        if self._size < self.capacity:
            return self._rewards[: self._size].copy()
        return np.roll(self._rewards, -self._ptr).copy()
