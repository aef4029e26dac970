"""Rule-based baseline scheduler: NR first, LTE fallback, else wait.

Scans buffer slots in order and grabs 5G NR for the first job whose
owner is inside NR coverage; if NR cannot be used it falls back to the
first job servable over LTE.  Deliberately ignores that NR is slower
than LTE near the edge of its coverage area -- learned policies are
expected to exploit that.
"""

from __future__ import annotations

import numpy as np

from .config import ConfigError, LTE, NR
from .env import Environment
from .mdp import (
    TaskSpec,
    action_index,
    caching_rate_from_counters,
    counters_delta,
    decode_action,
    legal_actions,
    noop_index,
    reward_components,
    task_reward,
    task_spec,
)


def heuristic_action(env: Environment, legal: np.ndarray | None = None) -> int:
    """Pick one action index for the current state.

    ``legal`` is the mask from :func:`ratsteer.mdp.legal_actions`; it is
    recomputed when not supplied.  The choice always satisfies the mask.
    """
    cfg = env.config
    if cfg.n_rats < 2:
        raise ConfigError("the rule-based scheduler needs the LTE+NR pair")
    if legal is None:
        legal = legal_actions(env)
    for slot in range(cfg.buffer_size):
        if legal[action_index(slot, NR, cfg)]:
            return action_index(slot, NR, cfg)
    for slot in range(cfg.buffer_size):
        if legal[action_index(slot, LTE, cfg)]:
            return action_index(slot, LTE, cfg)
    return noop_index(cfg)


def run_heuristic_episode(env: Environment, task: TaskSpec | None = None):
    """One episode driven by the rule-based scheduler.

    Uses the same per-idle-RAT query cadence as the learned agents so the
    baselines are directly comparable.  Returns the same stats record as
    :func:`ratsteer.agent.run_episode`.
    """
    from .agent import EpisodeStats  # local import to avoid a cycle

    if task is None:
        task = task_spec(5)
    cfg = env.config
    start = env.counters.copy()
    steps = cfg.episode_len_steps
    ep_return = 0.0
    for _step in range(steps):
        for _ in env.idle_rats():
            action = heuristic_action(env)
            pair = decode_action(action, cfg)
            if pair is not None:
                slot, rat = pair
                env.begin_transmission(rat, slot)
        events = env.advance()
        ep_return += task_reward(reward_components(events, env), task)
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
        epsilon_end=0.0,
        mean_loss=0.0,
        transitions=0,
    )
