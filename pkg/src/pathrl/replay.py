"""Transition replay: ring buffer with uniform or prioritized sampling.

Priorities live in a binary sum tree so that sampling proportional to priority
and priority updates both cost O(log n). The tree stores the already
exponentiated priority (|td| + eps)^alpha; importance weights follow
(N * P(i))^-beta, normalized by the batch maximum.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError


class SumTree:
    """Fixed-capacity binary tree whose internal nodes hold subtree sums."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("sum tree capacity must be positive")
        self.capacity = capacity
        self.leaf_base = 1
        while self.leaf_base < capacity:
            self.leaf_base *= 2
        self.tree = np.zeros(2 * self.leaf_base)

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def get(self, idx) -> np.ndarray:
        return self.tree[self.leaf_base + np.asarray(idx)]

    def set_one(self, i: int, value: float) -> None:
        if value < 0:
            raise ConfigError("priorities must be non-negative")
        node = self.leaf_base + i
        delta = value - self.tree[node]
        while node >= 1:
            self.tree[node] += delta
            node //= 2

    def set(self, idx, values) -> None:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        values = np.atleast_1d(np.asarray(values, dtype=np.float64))
        if np.any(values < 0):
            raise ConfigError("priorities must be non-negative")
        if len(idx) == 1:
            self.set_one(int(idx[0]), float(values[0]))
            return
        # duplicate indices carry identical priorities (same transition in one
        # batch), so keeping the first occurrence is exact
        unique_idx, first = np.unique(idx, return_index=True)
        nodes = self.leaf_base + unique_idx
        delta = values[first] - self.tree[nodes]
        self.tree[nodes] = values[first]
        parents = nodes // 2
        while True:
            np.add.at(self.tree, parents, delta)
            if parents[0] <= 1:
                break
            parents //= 2

    def find(self, targets: np.ndarray) -> np.ndarray:
        """Leaf indices whose cumulative-sum interval contains each target."""
        idx = np.ones(len(targets), dtype=np.int64)
        remaining = np.asarray(targets, dtype=np.float64).copy()
        while idx[0] < self.leaf_base:
            left = 2 * idx
            left_sum = self.tree[left]
            go_right = remaining >= left_sum
            remaining -= np.where(go_right, left_sum, 0.0)
            idx = left + go_right
        return idx - self.leaf_base

    def audit(self) -> bool:
        """Every internal node equals the sum of its children (testing hook)."""
        internal = np.arange(1, self.leaf_base)
        return bool(np.allclose(self.tree[internal],
                                self.tree[2 * internal] + self.tree[2 * internal + 1]))


class ReplayBuffer:
    """Ring buffer of transitions with optional prioritized sampling."""

    def __init__(self, capacity: int, obs_dim: int, prioritized: bool = False,
                 alpha: float = 0.6, eps: float = 1e-6):
        if capacity < 1:
            raise ConfigError("buffer capacity must be positive")
        self.capacity = capacity
        self.prioritized = prioritized
        self.alpha = alpha
        self.eps = eps
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.actions = np.zeros(capacity, dtype=np.int32)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.terminal = np.zeros(capacity, dtype=bool)
        self.pos = 0
        self.size = 0
        self.tree = SumTree(capacity) if prioritized else None
        self.max_priority = 1.0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, action, reward, next_obs, terminal) -> None:
        i = self.pos
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.terminal[i] = terminal
        if self.prioritized:
            self.tree.set_one(i, self.max_priority)
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator, beta: float = 0.0):
        """Returns (indices, batch dict, importance weights)."""
        if self.size == 0:
            raise ConfigError("cannot sample from an empty buffer")
        if self.prioritized:
            targets = rng.random(batch_size) * self.tree.total
            idx = self.tree.find(targets)
            # numerical edge: a target equal to the total can land one past the
            # last filled slot
            idx = np.minimum(idx, self.size - 1)
            probs = self.tree.get(idx) / self.tree.total
            weights = (self.size * probs) ** (-beta)
            weights = weights / weights.max()
        else:
            idx = rng.integers(0, self.size, size=batch_size)
            weights = np.ones(batch_size)
        batch = {
            "obs": self.obs[idx].astype(np.float64),
            "actions": self.actions[idx].astype(np.int64),
            "rewards": self.rewards[idx].astype(np.float64),
            "next_obs": self.next_obs[idx].astype(np.float64),
            "terminal": self.terminal[idx],
        }
        return idx, batch, weights

    def update_priorities(self, idx, td_errors) -> None:
        if not self.prioritized:
            return
        priorities = (np.abs(np.asarray(td_errors, dtype=np.float64)) + self.eps) ** self.alpha
        self.tree.set(idx, priorities)
        self.max_priority = max(self.max_priority, float(priorities.max()))
