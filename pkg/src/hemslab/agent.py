"""Double DQN training on the household environment.

One agent controls the whole roster through the joint action index. Targets
are computed double-style: the online network picks the argmax action in the
next state, the target network evaluates it. Terminal transitions bootstrap
nothing. Exploration is epsilon-greedy with a per-episode exponential decay.

All randomness flows from one seed through named SeedSequence children
(network init, action selection, replay sampling, episode starts), so a
rerun with the same config and seed reproduces the learning curve byte for
byte on the same backend.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .environment import EpisodeTrace, HomeEnvironment, episode_cost
from .errors import NumericalError
from .neural import (
    AdamState,
    DuelingNetwork,
    forward,
    init_network,
    optimizer_step,
    sync_target,
    td_loss_and_gradients,
)


@dataclass(frozen=True)
class TrainingConfig:
    episodes: int = 1500
    learning_rate: float = 1e-3
    discount: float = 0.99
    epsilon_max: float = 1.0
    epsilon_decay: float = 0.005
    epsilon_min: float = 0.01
    batch_size: int = 64
    replay_capacity: int = 100_000
    target_sync_period: int = 200
    hidden1: int = 128
    hidden2: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not (0.0 < self.discount <= 1.0):
            raise ValueError("discount must be in (0, 1]")
        if not (0.0 <= self.epsilon_min <= self.epsilon_max <= 1.0):
            raise ValueError("need 0 <= epsilon_min <= epsilon_max <= 1")
        if self.epsilon_decay < 0:
            raise ValueError("epsilon_decay must be >= 0")
        if self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ValueError("replay capacity must hold at least one batch")
        if self.target_sync_period < 1:
            raise ValueError("target_sync_period must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class EpsilonSchedule:
    epsilon_max: float = 1.0
    epsilon_decay: float = 0.005
    epsilon_min: float = 0.01

    def __call__(self, episode: int) -> float:
        """Exploration rate for a 0-based episode index."""
        return self.epsilon_min + (self.epsilon_max - self.epsilon_min) * math.exp(
            -self.epsilon_decay * episode)


@dataclass(frozen=True)
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    terminal: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling (with replacement)."""

    def __init__(self, capacity: int, obs_dim: int, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._rng = rng
        self._obs = np.zeros((capacity, obs_dim))
        self._next_obs = np.zeros((capacity, obs_dim))
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._terminal = np.zeros(capacity, dtype=bool)
        self._size = 0
        self._head = 0

    def __len__(self) -> int:
        return self._size

    def push(self, obs, action, reward, next_obs, terminal) -> None:
        i = self._head
        self._obs[i] = obs
        self._actions[i] = action
        self._rewards[i] = reward
        self._next_obs[i] = next_obs
        self._terminal[i] = terminal
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int) -> Batch:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = self._rng.integers(0, self._size, size=batch_size)
        return Batch(self._obs[idx].copy(), self._actions[idx].copy(),
                     self._rewards[idx].copy(), self._next_obs[idx].copy(),
                     self._terminal[idx].copy())


def select_action(net: DuelingNetwork, obs: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy over the joint action space; greedy ties break to the
    lowest index."""
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(0, net.n_actions))
    q, _, _ = forward(net, obs.reshape(1, -1))
    return int(np.argmax(q[0]))


def compute_targets(net: DuelingNetwork, target_net: DuelingNetwork, batch: Batch,
                    discount: float) -> np.ndarray:
    """Double targets: online argmax, target evaluation; terminal rows get
    the bare reward."""
    q_online, _, _ = forward(net, batch.next_obs)
    best = np.argmax(q_online, axis=1)
    q_target, _, _ = forward(target_net, batch.next_obs)
    rows = np.arange(len(best))
    y = batch.rewards + discount * q_target[rows, best]
    return np.where(batch.terminal, batch.rewards, y)


@dataclass
class CurvePoint:
    episode: int
    epsilon: float
    cum_reward: float
    loss_mean: float


@dataclass
class TrainResult:
    net: DuelingNetwork
    opt: AdamState
    curve: list[CurvePoint]
    gradient_steps: int
    target_syncs: int
    seconds: float


def write_curve_csv(path: str | Path, curve: list[CurvePoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "epsilon", "cum_reward", "loss_mean"])
        for p in curve:
            w.writerow([p.episode, repr(p.epsilon), repr(p.cum_reward), repr(p.loss_mean)])


def train(
    env: HomeEnvironment,
    config: TrainingConfig,
    *,
    episode_starts: list[int] | None = None,
    modes: str | Mapping = "sample",
    on_episode: Callable[[CurvePoint], None] | None = None,
) -> TrainResult:
    """Run the full training loop.

    episode_starts, when given, is the pool of allowed episode start steps
    (sampled uniformly per episode); otherwise every day-aligned start that
    fits the series is eligible.
    """
    t0 = time.perf_counter()
    seeds = np.random.SeedSequence(config.seed).spawn(4)
    rng_action = np.random.default_rng(seeds[1])
    rng_sample = np.random.default_rng(seeds[2])
    rng_episode = np.random.default_rng(seeds[3])

    net = init_network(env.observation_size, env.n_actions,
                       config.hidden1, config.hidden2, seed=seeds[0])
    target = net.copy()
    opt = AdamState.for_network(net, lr=config.learning_rate)
    buffer = ReplayBuffer(config.replay_capacity, env.observation_size, rng_sample)
    schedule = EpsilonSchedule(config.epsilon_max, config.epsilon_decay, config.epsilon_min)

    if episode_starts is None:
        day = env.grid.steps_per_day
        last = len(env.prices) - env.grid.steps_per_episode
        episode_starts = list(range(0, last + 1, day))
    if not episode_starts:
        raise ValueError("no eligible episode starts")

    curve: list[CurvePoint] = []
    gradient_steps = 0
    target_syncs = 0
    for episode in range(config.episodes):
        epsilon = schedule(episode)
        start = int(episode_starts[rng_episode.integers(0, len(episode_starts))])
        obs = env.reset(start, modes)
        cum_reward = 0.0
        loss_sum = 0.0
        loss_count = 0
        done = False
        while not done:
            action = select_action(net, obs, epsilon, rng_action)
            next_obs, breakdown, done, _ = env.step(action)
            reward = breakdown.total
            buffer.push(obs, action, reward, next_obs, done)
            obs = next_obs
            cum_reward += reward
            if len(buffer) >= config.batch_size:
                batch = buffer.sample(config.batch_size)
                targets = compute_targets(net, target, batch, config.discount)
                loss, grads = td_loss_and_gradients(net, batch.obs, batch.actions, targets)
                if not math.isfinite(loss):
                    raise NumericalError(
                        f"non-finite loss {loss!r} at episode {episode}, "
                        f"gradient step {gradient_steps}; check learning rate and inputs"
                    )
                optimizer_step(net, opt, grads)
                gradient_steps += 1
                loss_sum += loss
                loss_count += 1
                if gradient_steps % config.target_sync_period == 0:
                    sync_target(net, target)
                    target_syncs += 1
        point = CurvePoint(episode, epsilon, cum_reward,
                           loss_sum / loss_count if loss_count else float("nan"))
        curve.append(point)
        if on_episode is not None:
            on_episode(point)
    return TrainResult(net, opt, curve, gradient_steps, target_syncs,
                       time.perf_counter() - t0)


def greedy_rollout(
    net: DuelingNetwork,
    env: HomeEnvironment,
    start: int,
    modes: str | Mapping = "sample",
) -> tuple[EpisodeTrace, dict[str, float], float, float]:
    """Run one greedy episode.

    Returns (trace, per-appliance costs, cumulative reward, decision seconds:
    wall-clock spent choosing actions)."""
    obs = env.reset(start, modes)
    done = False
    cum_reward = 0.0
    decision_seconds = 0.0
    while not done:
        t0 = time.perf_counter()
        q, _, _ = forward(net, obs.reshape(1, -1))
        action = int(np.argmax(q[0]))
        decision_seconds += time.perf_counter() - t0
        obs, breakdown, done, _ = env.step(action)
        cum_reward += breakdown.total
    trace = env.trace
    costs = episode_cost(trace, env.grid.dt_hours)
    return trace, costs, cum_reward, decision_seconds
