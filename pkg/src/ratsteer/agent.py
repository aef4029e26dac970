"""DQN control: epsilon-greedy action selection, replay and episode loop.

One agent owns one parameter vector, one replay buffer and one RNG.  Per
simulation step the agent is queried once for every RAT that is idle at
the start of the step (the action space covers both RATs, so a query may
also fill the other transmitter); the step reward is shared by all
queries issued in that step.  One gradient step runs per simulation step
once the replay holds a full minibatch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DqnHyper
from .env import Environment
from .mdp import (
    TaskSpec,
    caching_rate_from_counters,
    counters_delta,
    decode_action,
    observe,
    reward_components,
    task_reward,
)
from .network import NetSpec, TdKernel, forward, init_params


class ReplayBuffer:
    """Fixed-capacity ring of transitions stored as flat arrays."""

    def __init__(self, capacity: int, state_dim: int, n_actions: int):
        self.capacity = capacity
        self.states = np.empty((capacity, state_dim), dtype=np.float32)
        self.actions = np.empty(capacity, dtype=np.int64)
        self.rewards = np.empty(capacity, dtype=np.float64)
        self.next_states = np.empty((capacity, state_dim), dtype=np.float32)
        self.next_masks = np.empty((capacity, n_actions), dtype=bool)
        self.terminals = np.empty(capacity, dtype=bool)
        self.size = 0
        self._cursor = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action, reward, next_state, next_mask, terminal) -> None:
        i = self._cursor
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.next_masks[i] = next_mask
        self.terminals[i] = terminal
        self._cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch: int):
        """Uniform minibatch without replacement (indices are distinct)."""
        idx = rng.choice(self.size, size=batch, replace=False)
        return (
            self.states[idx].astype(np.float64),
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx].astype(np.float64),
            self.next_masks[idx],
            self.terminals[idx],
        )


def epsilon_at(hyper: DqnHyper, step: int) -> float:
    """Linearly decayed exploration rate, clipped at ``eps_end``."""
    if step >= hyper.eps_decay_steps:
        return hyper.eps_end
    frac = step / hyper.eps_decay_steps
    return hyper.eps_start + (hyper.eps_end - hyper.eps_start) * frac


def select_action(spec: NetSpec, params: np.ndarray, state, epsilon: float,
                  mask: np.ndarray, rng: np.random.Generator) -> int:
    """Epsilon-greedy over the legal actions; greedy ties break low-index."""
    legal = np.flatnonzero(mask)
    if legal.size == 0:
        raise ValueError("action mask has no legal action")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(legal[rng.integers(legal.size)])
    q = forward(spec, params, state)
    return int(np.argmax(np.where(mask, q, -np.inf)))


def bellman_targets(spec: NetSpec, params: np.ndarray, rewards, next_states,
                    next_masks, terminals, gamma: float) -> np.ndarray:
    """Batch of TD targets: r + gamma * max over legal a' (zero if terminal)."""
    q = forward(spec, params, next_states)
    q = np.where(next_masks, q, -np.inf)
    best = q.max(axis=1)
    return np.asarray(rewards, dtype=float) + gamma * best * ~np.asarray(terminals)


def bellman_target(spec: NetSpec, params: np.ndarray, reward: float, next_state,
                   next_mask, terminal: bool, gamma: float) -> float:
    if terminal:
        return float(reward)
    y = bellman_targets(
        spec, params, np.array([reward]), np.atleast_2d(next_state),
        np.atleast_2d(next_mask), np.array([False]), gamma,
    )
    return float(y[0])


class DqnAgent:
    """Parameters + replay + RNG; trained in place by :func:`run_episode`."""

    def __init__(self, spec: NetSpec, hyper: DqnHyper, seed: int,
                 params: np.ndarray | None = None):
        hyper.validate()
        self.spec = spec
        self.hyper = hyper
        self.seed = seed
        self.params = init_params(spec, seed) if params is None else params.copy()
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        self.replay = ReplayBuffer(hyper.replay_capacity, spec.input_dim, spec.output_dim)
        self.global_step = 0
        self._kernel = TdKernel(spec, hyper.minibatch)

    @property
    def epsilon(self) -> float:
        return epsilon_at(self.hyper, self.global_step)

    def reset_replay(self) -> None:
        self.replay = ReplayBuffer(
            self.hyper.replay_capacity, self.spec.input_dim, self.spec.output_dim
        )


@dataclass(frozen=True)
class EpisodeStats:
    task_id: int
    steps: int
    ep_return: float
    jobs_completed: int
    jobs_lost: int
    caching_packets: float | None
    caching_bytes: float | None
    epsilon_end: float
    mean_loss: float
    transitions: int


def run_episode(agent: DqnAgent, env: Environment, task: TaskSpec,
                learn: bool = True, greedy: bool = False) -> EpisodeStats:
    """Drive the environment for one episode.

    ``greedy=True`` evaluates with epsilon 0 and frozen exploration
    bookkeeping; combined with ``learn=False`` it leaves the agent
    untouched.  Caching rates in the returned stats cover only the jobs
    resolved during this episode.
    """
    cfg = env.config
    hyper = agent.hyper
    start = env.counters.copy()
    steps = cfg.episode_len_steps
    ep_return = 0.0
    loss_sum = 0.0
    loss_count = 0
    transitions = 0

    for step in range(steps):
        idle = env.idle_rats()
        queries = []
        for _ in idle:
            state, mask = observe(env)
            eps = 0.0 if greedy else agent.epsilon
            action = select_action(agent.spec, agent.params, state, eps, mask, agent.rng)
            pair = decode_action(action, cfg)
            if pair is not None:
                slot, rat = pair
                env.begin_transmission(rat, slot)
            queries.append((state, action))

        events = env.advance()
        reward = task_reward(reward_components(events, env), task)
        ep_return += reward

        if learn:
            terminal = step == steps - 1
            next_state, next_mask = observe(env)
            for state, action in queries:
                agent.replay.push(state, action, reward, next_state, next_mask, terminal)
                transitions += 1
            if len(agent.replay) >= hyper.minibatch:
                s, a, r, s2, m2, term = agent.replay.sample(agent.rng, hyper.minibatch)
                agent.params, loss = agent._kernel.step(
                    agent.params, s, a, r, s2, m2, term, hyper.gamma, hyper.lr,
                    hyper.grad_clip,
                )
                loss_sum += loss
                loss_count += 1
        if not greedy:
            agent.global_step += 1

    delta = counters_delta(start, env.counters)
    packets, nbytes = caching_rate_from_counters(delta)
    return EpisodeStats(
        task_id=task.task_id,
        steps=steps,
        ep_return=ep_return,
        jobs_completed=delta.jobs_completed,
        jobs_lost=delta.jobs_lost,
        caching_packets=packets,
        caching_bytes=nbytes,
        epsilon_end=0.0 if greedy else agent.epsilon,
        mean_loss=loss_sum / loss_count if loss_count else 0.0,
        transitions=transitions,
    )
