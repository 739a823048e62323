"""Fixed-capacity ring buffer of transitions with uniform sampling."""

import logging
from dataclasses import dataclass

import numpy as np
import torch

from hivec.domain import Transition

logger = logging.getLogger("hivec.agents.replay")


@dataclass
class Batch:
    """A sampled minibatch, one row per transition."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)

    def tensors(self, dtype: torch.dtype = torch.float32) -> tuple[torch.Tensor, ...]:
        return tuple(
            torch.as_tensor(a, dtype=dtype)
            for a in (self.states, self.actions, self.rewards, self.next_states, self.dones)
        )


class ReplayBuffer:
    """
    Ring buffer: once full, each insertion overwrites the oldest transition.

    Args:
        capacity: Maximum number of stored transitions.
        obs_dim: Observation length.
        act_dim: Stored action length.
        rng: Generator used for sampling.
    """

    def __init__(
        self, capacity: int, obs_dim: int, act_dim: int, rng: np.random.Generator
    ) -> None:
        if capacity < 1:
            raise ValueError(f"Capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.rng = rng
        self._states = np.zeros((capacity, obs_dim))
        self._actions = np.zeros((capacity, act_dim))
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, obs_dim))
        self._dones = np.zeros(capacity)
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def cursor(self) -> int:
        return self._cursor

    def add(self, t: Transition) -> None:
        i = self._cursor
        self._states[i] = t.state
        self._actions[i] = t.action
        self._rewards[i] = t.reward
        self._next_states[i] = t.next_state
        self._dones[i] = float(t.done)
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int) -> Batch:
        """Draw ``batch_size`` stored transitions uniformly, with replacement."""
        if self._size == 0:
            raise ValueError("Cannot sample from an empty replay buffer")
        idx = self.rng.integers(0, self._size, size=batch_size)
        return Batch(
            states=self._states[idx],
            actions=self._actions[idx],
            rewards=self._rewards[idx],
            next_states=self._next_states[idx],
            dones=self._dones[idx],
        )
