"""
Experience replay for the DDPG agent
"""

from collections import deque
from dataclasses import dataclass
from typing import Deque

import numpy as np


@dataclass
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool
    # halting target ||h - h_t||^2 (normalised) paired with the score in a[0]
    error: float = float('nan')


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    errors: np.ndarray

    def __len__(self) -> int:
        return self.states.shape[0]

    @classmethod
    def from_transitions(cls, transitions) -> 'Batch':
        return cls(
            states=np.stack([tr.s for tr in transitions]),
            actions=np.stack([tr.a for tr in transitions]),
            rewards=np.array([tr.r for tr in transitions], dtype=float),
            next_states=np.stack([tr.s_next for tr in transitions]),
            dones=np.array([tr.done for tr in transitions], dtype=float),
            errors=np.array([tr.error for tr in transitions], dtype=float),
        )


class ReplayBuffer:
    """FIFO ring of transitions"""

    def __init__(self, capacity: int, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.rng = rng
        self.entries: Deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self.entries)

    def push(self, transition: Transition) -> None:
        self.entries.append(transition)

    def sample(self, batch_size: int) -> Batch:
        if not self.entries:
            raise ValueError("cannot sample from an empty replay buffer")
        size = len(self.entries)
        indices = self.rng.choice(size, size=batch_size, replace=batch_size > size)
        return Batch.from_transitions([self.entries[i] for i in indices])
