"""Double DQN with prioritized replay for PBN control."""
from __future__ import annotations

import csv
import hashlib
import io
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Literal

import numpy as np

from . import mlp
from .env import ControlConfig, PBNControlEnv, reset_batch
from .pbn import PBNSpec, apply_intervention_batch, state_to_bits, step_natural_batch
from .per import ExperienceBatch, PrioritizedReplayBuffer, anneal_beta, Experience

log = logging.getLogger(__name__)

EPOCH_LENGTH = 5_000


@dataclass
class TrainConfig:
    iterations: int = 300_000
    horizon: int = 11
    success_reward: float = 5.0
    buffer_capacity: int = 1_024
    gamma: float = 0.95
    sync_period: int = 500
    batch_size: int = 128
    lr: float = 1e-4
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.8
    alpha: float = 0.6
    beta0: float = 0.4
    priority_eps: float = 1e-5
    priority_mode: Literal["squared", "abs"] = "squared"
    reward_mode: Literal["full", "target-only"] = "full"
    hidden: tuple[int, ...] = (100, 100)
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        errors = []
        if not 0 < self.gamma < 1:
            errors.append("gamma must lie in (0, 1)")
        if self.sync_period < 1:
            errors.append("sync_period must be >= 1")
        if self.iterations < self.batch_size:
            errors.append("iterations must be >= batch_size")
        if self.buffer_capacity < self.batch_size:
            errors.append("buffer_capacity must be >= batch_size")
        if self.horizon < 1:
            errors.append("horizon must be >= 1")
        if self.success_reward <= 2:
            errors.append("success_reward must exceed 2")
        if self.priority_mode not in ("squared", "abs"):
            errors.append("priority_mode must be 'squared' or 'abs'")
        if errors:
            raise ValueError("; ".join(errors))

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**d)

    def epsilon(self, iteration: int) -> float:
        span = self.eps_decay_fraction * self.iterations
        if span <= 0 or iteration >= span:
            return self.eps_end
        return self.eps_start + (self.eps_end - self.eps_start) * iteration / span


# Hyperparameter presets used for the three benchmark networks.
PRESETS = {
    "pbn10": dict(iterations=300_000, horizon=11, success_reward=5.0, buffer_capacity=1_024,
                  gamma=0.95, sync_period=500),
    "pbn20": dict(iterations=700_000, horizon=100, success_reward=20.0, buffer_capacity=50_000,
                  gamma=0.90, sync_period=5_000),
    "melanoma": dict(iterations=150_000, horizon=7, success_reward=5.0, buffer_capacity=1_024,
                     gamma=0.99, sync_period=500),
}


@dataclass
class EpochMetrics:
    epoch: int
    mean_interventions: float
    std_interventions: float
    success_rate: float
    mean_loss: float
    epsilon: float


METRIC_COLUMNS = ["epoch", "mean_interventions", "std_interventions", "success_rate", "mean_loss", "epsilon"]


def metrics_to_csv(metrics: list[EpochMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for m in metrics:
        w.writerow([m.epoch] + [repr(float(getattr(m, c))) for c in METRIC_COLUMNS[1:]])
    return buf.getvalue()


def select_action(q: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; ``np.argmax`` already breaks ties toward the lowest index."""
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(0, len(q)))
    return int(np.argmax(q))


def compute_targets(batch: ExperienceBatch, online: mlp.QNetworkParams, target: mlp.QNetworkParams,
                    gamma: float, n: int, q_next_online: np.ndarray | None = None) -> np.ndarray:
    """r + gamma * Q_target(s', argmax_a Q_online(s', a)), or just r when terminal."""
    x_next = state_to_bits(batch.s_next, n).astype(float)
    if q_next_online is None:
        q_next_online = mlp.forward(online, x_next)
    best = np.argmax(q_next_online, axis=1)
    q_eval = mlp.forward(target, x_next)[np.arange(len(best)), best]
    return np.where(batch.terminal, batch.r, batch.r + gamma * q_eval)


class DDQNLearner:
    """Online/target networks, optimizer and replay buffer for one run."""

    def __init__(self, n_in: int, cfg: TrainConfig, rng: np.random.Generator, n_out: int | None = None):
        self.cfg = cfg
        self.n_in = n_in
        self.online = mlp.init_params(n_in, rng, hidden=cfg.hidden, n_out=n_out)
        self.target = mlp.copy_params(self.online)
        self.opt = mlp.Adam(self.online, lr=cfg.lr)
        self.buffer = PrioritizedReplayBuffer(cfg.buffer_capacity, cfg.alpha, cfg.priority_eps)
        self.updates = 0

    def q_values(self, state: int) -> np.ndarray:
        return mlp.forward(self.online, state_to_bits(state, self.n_in).astype(float))

    def sync(self) -> None:
        if not self.online.all_finite():
            raise FloatingPointError("non-finite network parameters")
        mlp.copy_into(self.target, self.online)

    def train_step(self, iteration: int, total: int, rng: np.random.Generator) -> float:
        """One prioritized minibatch update; returns the weighted mean squared TD error."""
        cfg = self.cfg
        beta = anneal_beta(iteration, total, cfg.beta0)
        idx, batch, w = self.buffer.sample(cfg.batch_size, beta, rng)
        B = len(batch)
        x = state_to_bits(np.concatenate([batch.s, batch.s_next]), self.n_in).astype(float)
        q_all, acts = mlp.forward_cached(self.online, x)
        y = compute_targets(batch, self.online, self.target, cfg.gamma, self.n_in, q_next_online=q_all[B:])
        q_sa = q_all[np.arange(B), batch.a]
        td = y - q_sa
        losses = td * td
        loss = float(np.mean(w * losses))
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite loss at iteration {iteration}")
        upstream = np.zeros_like(q_all)
        upstream[np.arange(B), batch.a] = -2.0 * w * td / B
        grads = mlp.backward_cached(self.online, acts, upstream)
        self.opt.step(self.online, grads)
        self.buffer.update_priorities(idx, losses if cfg.priority_mode == "squared" else np.abs(td))
        self.updates += 1
        return loss


def _params_digest(p: mlp.QNetworkParams) -> str:
    h = hashlib.sha256()
    for a in p.arrays():
        h.update(a.tobytes())
    return h.hexdigest()


@dataclass
class TrainResult:
    params: mlp.QNetworkParams
    target_params: mlp.QNetworkParams
    metrics: list[EpochMetrics] = field(default_factory=list)


def _streams(seed: int, k: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def train(spec: PBNSpec, control: ControlConfig, cfg: TrainConfig, debug: bool = False,
          progress: Callable[[EpochMetrics], None] | None = None) -> TrainResult:
    """Train a controller for ``cfg.iterations`` environment steps.

    Gradient updates start once the replay buffer is full, one per
    environment step. Metrics are emitted every 5,000 iterations.
    """
    init_rng, env_rng, act_rng, replay_rng = _streams(cfg.seed, 4)
    learner = DDQNLearner(spec.n, cfg, init_rng)
    env = PBNControlEnv(spec, control, env_rng)
    metrics: list[EpochMetrics] = []
    lengths, successes, losses = [], [], []
    target_digest = _params_digest(learner.target) if debug else None

    s = env.reset()
    for it in range(cfg.iterations):
        eps = cfg.epsilon(it)
        a = select_action(learner.q_values(s), eps, act_rng)
        out = env.step(a)
        # horizon cuts keep bootstrapping; only entering the target is terminal
        learner.buffer.push(Experience(s, a, out.reward, out.next_state, out.reason == "success"))
        if out.terminal:
            lengths.append(env.steps)
            successes.append(out.reason == "success")
            s = env.reset()
        else:
            s = out.next_state

        if len(learner.buffer) >= cfg.buffer_capacity:
            losses.append(learner.train_step(it, cfg.iterations, replay_rng))
        if (it + 1) % cfg.sync_period == 0:
            learner.sync()
            if debug:
                target_digest = _params_digest(learner.target)
        elif debug and _params_digest(learner.target) != target_digest:
            raise AssertionError(f"target network changed outside a sync boundary at iteration {it}")

        if (it + 1) % EPOCH_LENGTH == 0:
            m = EpochMetrics(
                epoch=len(metrics),
                mean_interventions=float(np.mean(lengths)) if lengths else float("nan"),
                std_interventions=float(np.std(lengths)) if lengths else float("nan"),
                success_rate=float(np.mean(successes)) if successes else float("nan"),
                mean_loss=float(np.mean(losses)) if losses else float("nan"),
                epsilon=eps,
            )
            metrics.append(m)
            log.info("epoch %d: interventions %.2f +- %.2f, success %.3f, loss %.4g, eps %.3f",
                     m.epoch, m.mean_interventions, m.std_interventions, m.success_rate, m.mean_loss, eps)
            if progress is not None:
                progress(m)
            lengths, successes, losses = [], [], []
    return TrainResult(learner.online, learner.target, metrics)


# -- evaluation ----------------------------------------------------------------

@dataclass
class EvalResult:
    success_rate: float
    mean_interventions: float
    std_interventions: float
    histogram: dict[int, int]        # episode length -> count, successes only
    lengths: np.ndarray
    successes: np.ndarray


def rollout_policy(spec: PBNSpec, control: ControlConfig, policy: Callable[[np.ndarray], np.ndarray],
                   episodes: int, horizon: int, rng: np.random.Generator) -> EvalResult:
    """Run ``episodes`` independent episodes in lockstep.

    ``policy`` maps an (m, n) 0/1 array of current states to m actions.
    Interventions count every environment step taken, including no-ops.
    """
    states = reset_batch(spec, control, episodes, rng)
    lengths = np.zeros(episodes, dtype=np.int64)
    success = np.zeros(episodes, dtype=bool)
    live = np.ones(episodes, dtype=bool)
    for _ in range(horizon):
        if not live.any():
            break
        cur = states[live]
        actions = np.asarray(policy(state_to_bits(cur, spec.n).astype(float)), dtype=np.int64)
        nxt = step_natural_batch(spec, apply_intervention_batch(cur, actions), rng)
        states[live] = nxt
        lengths[live] += 1
        hit = control.classify(nxt) == 0
        ids = np.flatnonzero(live)
        success[ids[hit]] = True
        live[ids[hit]] = False
    ok = lengths[success]
    hist = {int(k): int(v) for k, v in zip(*np.unique(ok, return_counts=True))}
    return EvalResult(float(success.mean()), float(lengths.mean()), float(lengths.std()), hist, lengths, success)


def greedy_policy(params: mlp.QNetworkParams) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: np.argmax(mlp.forward(params, x), axis=1)


def evaluate(spec: PBNSpec, params: mlp.QNetworkParams, control: ControlConfig, episodes: int = 10_000,
             horizon: int | None = None, seed: int = 0) -> EvalResult:
    """Greedy (epsilon = 0) rollouts from uniform non-target starts."""
    horizon = control.horizon if horizon is None else horizon
    return rollout_policy(spec, control, greedy_policy(params), episodes, horizon, np.random.default_rng(seed))


@dataclass
class BaselineResult:
    lengths: np.ndarray       # interventions until control; ``cap`` for runaway episodes
    reached: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.lengths.mean())

    @property
    def std(self) -> float:
        return float(self.lengths.std())

    def success_rate(self, horizon: int) -> float:
        return float((self.reached & (self.lengths <= horizon)).mean())


def random_baseline(spec: PBNSpec, control: ControlConfig, episodes: int, cap: int,
                    rng: np.random.Generator) -> BaselineResult:
    """Uniformly random interventions (no-op included) until the target is entered."""
    def policy(x):
        return rng.integers(0, spec.n + 1, size=len(x))
    res = rollout_policy(spec, control, policy, episodes, cap, rng)
    return BaselineResult(res.lengths, res.successes)


def config_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["hidden"] = list(d["hidden"])
    return d
