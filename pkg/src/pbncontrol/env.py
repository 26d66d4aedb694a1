"""Control MDP over a PBN: one optional single-gene flip, then one natural step."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .attractors import Attractor, AttractorIndex
from .pbn import PBNSpec, apply_intervention, state_to_bits, step_natural

RewardMode = Literal["full", "target-only"]

REWARD_STEP = -1.0
REWARD_TRAP = -2.0


@dataclass
class ControlConfig:
    target: Attractor
    horizon: int
    success_reward: float = 5.0
    all_attractors: Sequence[Attractor] | None = None
    reward_mode: RewardMode = "full"
    _index: AttractorIndex = field(init=False, repr=False)

    def __post_init__(self):
        if self.success_reward <= 2:
            raise ValueError(f"success reward must exceed 2, got {self.success_reward}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.reward_mode not in ("full", "target-only"):
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")
        if self.reward_mode == "full":
            if not self.all_attractors or not any(a.states == self.target.states for a in self.all_attractors):
                raise ValueError("full reward mode needs all_attractors containing the target")
        others = [] if self.reward_mode == "target-only" else [
            a for a in self.all_attractors if a.states != self.target.states]
        # slot 0 is the target, the rest are traps
        self._index = AttractorIndex([self.target, *others])

    def classify(self, states) -> np.ndarray:
        """0 for target states, 1 for other attractors, -1 otherwise."""
        k = self._index.lookup(states)
        return np.where(k == 0, 0, np.where(k > 0, 1, -1))

    def rewards(self, states) -> np.ndarray:
        c = self.classify(states)
        return np.where(c == 0, self.success_reward, np.where(c == 1, REWARD_TRAP, REWARD_STEP))


def reward_of(s_next: int, cfg: ControlConfig) -> float:
    return float(cfg.rewards(np.asarray([s_next]))[0])


@dataclass(frozen=True)
class StepOutcome:
    next_state: int
    reward: float
    terminal: bool
    reason: str | None  # "success", "horizon" or None


class ContractError(RuntimeError):
    """An environment method was called in a state that forbids it."""


class PBNControlEnv:
    """Single-episode control environment.

    ``reset`` draws a uniform non-target start; ``step`` applies the action,
    runs one natural step and scores the result. Episodes end on entering the
    target attractor or after ``horizon`` steps, whichever comes first.
    """

    def __init__(self, spec: PBNSpec, cfg: ControlConfig, rng: np.random.Generator):
        self.spec = spec
        self.cfg = cfg
        self.rng = rng
        self.state: int | None = None
        self.steps = 0
        self.done = True

    @property
    def n_actions(self) -> int:
        return self.spec.n + 1

    def observation(self) -> np.ndarray:
        return state_to_bits(self.state, self.spec.n).astype(float)

    def reset(self) -> int:
        while True:
            s = int(self.rng.integers(0, 2 ** self.spec.n))
            if s not in self.cfg.target:
                break
        self.state = s
        self.steps = 0
        self.done = False
        return s

    def step(self, action: int) -> StepOutcome:
        if self.done:
            raise ContractError("step() called on a finished episode; call reset() first")
        flipped = apply_intervention(self.state, int(action), self.spec.n)
        s_next = step_natural(self.spec, flipped, self.rng)
        self.steps += 1
        reward = reward_of(s_next, self.cfg)
        if s_next in self.cfg.target:
            reason = "success"
        elif self.steps >= self.cfg.horizon:
            reason = "horizon"
        else:
            reason = None
        self.state = s_next
        self.done = reason is not None
        return StepOutcome(s_next, reward, self.done, reason)


def reset_batch(spec: PBNSpec, cfg: ControlConfig, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` uniform non-target start states (rejection sampling)."""
    out = np.empty(0, dtype=np.int64)
    while len(out) < size:
        draw = rng.integers(0, 2 ** spec.n, size=size - len(out), dtype=np.int64)
        out = np.concatenate([out, draw[cfg.classify(draw) != 0]])
    return out
