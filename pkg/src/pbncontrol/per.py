"""Proportional prioritized experience replay backed by an array sum-tree."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class Experience(NamedTuple):
    s: int
    a: int
    r: float
    s_next: int
    terminal: bool


@dataclass
class ExperienceBatch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    terminal: np.ndarray

    def __len__(self):
        return len(self.a)


class SumTree:
    """Binary tree of partial sums over ``capacity`` leaves.

    Node 1 is the root, node k has children 2k and 2k+1, leaves start at
    ``self.offset``. Internal values are always recomputed from their
    children, never patched by deltas, so the root stays an exact sum of the
    current leaves up to float addition order.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.depth = max(1, int(np.ceil(np.log2(capacity))))
        self.offset = 1 << self.depth
        self.tree = np.zeros(2 * self.offset)

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def leaves(self) -> np.ndarray:
        return self.tree[self.offset:self.offset + self.capacity]

    def set(self, idx, values) -> None:
        nodes = np.unique(np.asarray(idx, dtype=np.int64) + self.offset)
        # with duplicate indices the last write wins, as in a sequential loop
        self.tree[np.asarray(idx, dtype=np.int64) + self.offset] = values
        while nodes[0] > 1:
            nodes = np.unique(nodes >> 1)
            self.tree[nodes] = self.tree[2 * nodes] + self.tree[2 * nodes + 1]

    def rebuild(self) -> None:
        for level in range(self.depth - 1, -1, -1):
            lo, hi = 1 << level, 1 << (level + 1)
            k = np.arange(lo, hi)
            self.tree[k] = self.tree[2 * k] + self.tree[2 * k + 1]

    def find(self, u) -> np.ndarray:
        """Leaf index whose cumulative interval [cum_{i-1}, cum_i) contains each query."""
        u = np.array(u, dtype=float, ndmin=1)
        node = np.ones(len(u), dtype=np.int64)
        for _ in range(self.depth):
            left = self.tree[2 * node]
            right = u >= left
            u = np.where(right, u - left, u)
            node = 2 * node + right
        return node - self.offset


def anneal_beta(iteration: int, total: int, beta0: float = 0.4) -> float:
    """Linear schedule from ``beta0`` at iteration 0 to 1.0 at ``total``."""
    if total <= 0:
        return 1.0
    frac = min(max(iteration / total, 0.0), 1.0)
    return beta0 + (1.0 - beta0) * frac


class PrioritizedReplayBuffer:
    """Ring buffer of transitions, sampled with P(i) = p_i^a / sum_z p_z^a.

    New transitions enter at the current maximum priority (1.0 when empty).
    Priorities are set from per-sample losses as ``loss + priority_eps``.
    """

    def __init__(self, capacity: int, alpha: float = 0.6, priority_eps: float = 1e-5):
        self.capacity = capacity
        self.alpha = alpha
        self.priority_eps = priority_eps
        self.tree = SumTree(capacity)
        self.priorities = np.zeros(capacity)       # raw p_i, before the alpha power
        self.s = np.zeros(capacity, dtype=np.int64)
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.s_next = np.zeros(capacity, dtype=np.int64)
        self.terminal = np.zeros(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def max_priority(self) -> float:
        return float(self.priorities[:self.size].max()) if self.size else 1.0

    def push(self, e: Experience) -> int:
        p = self.max_priority()
        i = self.cursor
        self.s[i], self.a[i], self.r[i], self.s_next[i], self.terminal[i] = e
        self.priorities[i] = p
        self.tree.set([i], [p ** self.alpha])
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return i

    def _set_alpha(self, alpha: float) -> None:
        self.alpha = alpha
        self.tree.leaves()[:self.size] = self.priorities[:self.size] ** alpha
        self.tree.rebuild()

    def probabilities(self) -> np.ndarray:
        leaves = self.tree.leaves()[:self.size]
        return leaves / leaves.sum()

    def sample(self, batch: int, beta: float, rng: np.random.Generator, alpha: float | None = None):
        """Draw ``batch`` indices with replacement.

        Returns ``(indices, ExperienceBatch, weights)`` where the importance
        weights ``(1 / (N * P(i)))**beta`` are divided by their batch maximum.
        """
        if self.size == 0 or self.size < batch:
            raise ValueError(f"buffer holds {self.size} transitions, cannot sample {batch}")
        if alpha is not None and alpha != self.alpha:
            self._set_alpha(alpha)
        total = self.tree.total
        u = rng.random(batch) * total
        idx = np.minimum(self.tree.find(u), self.size - 1)
        prob = self.tree.leaves()[idx] / total
        w = (self.size * prob) ** (-beta)
        w /= w.max()
        exp = ExperienceBatch(self.s[idx], self.a[idx], self.r[idx], self.s_next[idx], self.terminal[idx])
        return idx, exp, w

    def update_priorities(self, idx, losses) -> None:
        losses = np.asarray(losses, dtype=float)
        if (losses < 0).any():
            raise ValueError("losses must be non-negative")
        p = losses + self.priority_eps
        idx = np.asarray(idx, dtype=np.int64)
        self.priorities[idx] = p
        self.tree.set(idx, p ** self.alpha)
