"""Reptile meta-updates, FedAvg aggregation and the round orchestration.

Training runs N aggregation rounds.  In each round every one of the K
agents starts from the current global model, refreshes its buffer with
random demands, clears its replay (the global load moved it to a new
policy basin) and trains E episodes cycling the training tasks in blocks
of I.  Within a block the agent adapts a copy of the block anchor to
each task for one episode; the block ends with the anchor moved toward
the mean of the adapted parameter vectors, scaled by the meta step size.
After E episodes the agent uploads its parameters and the server
averages all K uploads into the next global model.

Baselines reuse the same machinery on a single environment: ``reptile``
keeps the task blocks without any aggregation, ``single`` trains the
all-components task only.  Both get the same total episode budget (N*E)
and the same demand-refresh cadence as one federated agent.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .agent import DqnAgent, EpisodeStats, run_episode
from .config import DqnHyper, EnvConfig, FmlConfig
from .env import Environment, build_env
from .mdp import task_spec
from .network import NetSpec, TrainingError, init_params, save_checkpoint

# seed-derivation streams; train/eval environment seeds get opposite
# parities so the two sets can never collide
_PARAMS, _AGENT, _TRAIN_ENV, _EVAL_ENV = 0, 1, 2, 3

EpisodeCallback = Callable[[int, int, int, EpisodeStats], None]
# args: round index, agent index, episode index within the round, stats


def derive_seed(base: int, stream: int, index: int = 0) -> int:
    return int(np.random.SeedSequence([base, stream, index]).generate_state(1)[0])


def train_env_seed(base: int, k: int) -> int:
    return derive_seed(base, _TRAIN_ENV, k) * 2


def eval_env_seed(base: int, i: int) -> int:
    return derive_seed(base, _EVAL_ENV, i) * 2 + 1


def param_seed(base: int) -> int:
    return derive_seed(base, _PARAMS)


def agent_seed(base: int, k: int) -> int:
    return derive_seed(base, _AGENT, k)


def net_spec_for(env_config: EnvConfig, hyper: DqnHyper) -> NetSpec:
    return NetSpec(
        input_dim=env_config.state_dim,
        hidden=hyper.hidden,
        output_dim=env_config.n_actions,
    )


# -- parameter-space arithmetic ----------------------------------------------

def reptile_update(theta: np.ndarray, adapted: list[np.ndarray],
                   beta: float) -> np.ndarray:
    """theta - beta * mean_i(theta - theta_i)."""
    if not adapted:
        raise ValueError("need at least one adapted parameter vector")
    stacked = np.stack(adapted)
    if stacked.shape[1:] != theta.shape:
        raise ValueError("adapted parameter vectors do not match theta's shape")
    return theta - beta * np.mean(theta - stacked, axis=0)


def fedavg(models: list[np.ndarray]) -> np.ndarray:
    """Elementwise arithmetic mean of the clients' parameter vectors."""
    if not models:
        raise ValueError("need at least one model to aggregate")
    stacked = np.stack(models)
    return stacked.mean(axis=0)


# -- training loops ------------------------------------------------------------

@dataclass
class RoundReport:
    round_index: int
    agent_stats: list[list[EpisodeStats]]   # K entries, E stats each
    checkpoint: str | None = None


def _train_task_blocks(agent: DqnAgent, env: Environment, fml: FmlConfig,
                       episodes: int, on_episode=None) -> list[EpisodeStats]:
    """Run ``episodes`` episodes in Reptile blocks of the I training tasks."""
    stats: list[EpisodeStats] = []
    done = 0
    while done < episodes:
        anchor = agent.params.copy()
        adapted = []
        for task_id in fml.training_tasks:
            if done >= episodes:
                break
            agent.params = anchor.copy()
            st = run_episode(agent, env, task_spec(task_id))
            adapted.append(agent.params.copy())
            stats.append(st)
            if on_episode is not None:
                on_episode(done, st)
            done += 1
        agent.params = reptile_update(anchor, adapted, fml.meta_step)
    return stats


def run_fml(fml: FmlConfig, env_config: EnvConfig, hyper: DqnHyper, seed: int,
            on_episode: EpisodeCallback | None = None,
            checkpoint_dir: str | Path | None = None,
            ) -> tuple[np.ndarray, list[RoundReport]]:
    """Full federated meta-training; returns the final global model.

    Fully reproducible from ``seed``: environment seeds, agent RNGs and
    the initial model all derive from it.
    """
    fml.validate()
    env_config.validate()
    hyper.validate()
    spec = net_spec_for(env_config, hyper)
    global_params = init_params(spec, param_seed(seed))
    agents = [
        DqnAgent(spec, hyper, seed=agent_seed(seed, k), params=global_params)
        for k in range(fml.agents)
    ]
    envs = [build_env(env_config, train_env_seed(seed, k)) for k in range(fml.agents)]

    reports: list[RoundReport] = []
    for n in range(fml.rounds):
        uploads = []
        round_stats = []
        for k, (agent, env) in enumerate(zip(agents, envs)):
            agent.params = global_params.copy()
            agent.reset_replay()
            env.reset_demands()
            cb = None
            if on_episode is not None:
                cb = lambda e, st, _n=n, _k=k: on_episode(_n, _k, e, st)
            try:
                stats = _train_task_blocks(agent, env, fml,
                                           fml.episodes_per_round, cb)
            except TrainingError as err:
                raise TrainingError(
                    f"round {n}, agent {k} (env seed {env.seed}): {err}"
                ) from err
            uploads.append(agent.params.copy())
            round_stats.append(stats)
        global_params = fedavg(uploads)
        ckpt = None
        if checkpoint_dir is not None:
            path = Path(checkpoint_dir) / f"global_round{n:03d}.ckpt"
            save_checkpoint(path, spec, global_params, seed)
            ckpt = str(path)
        reports.append(RoundReport(n, round_stats, ckpt))
    return global_params, reports


def run_baseline(method: str, fml: FmlConfig, env_config: EnvConfig,
                 hyper: DqnHyper, seed: int,
                 on_episode: EpisodeCallback | None = None,
                 ) -> tuple[np.ndarray, list[RoundReport]]:
    """Train a non-federated baseline with the same N*E episode budget.

    ``single`` runs the all-components task only; ``reptile`` keeps the
    multi-task meta blocks but has one environment and no aggregation.
    """
    if method not in ("single", "reptile"):
        raise ValueError(f"unknown baseline {method!r}")
    fml.validate()
    env_config.validate()
    hyper.validate()
    spec = net_spec_for(env_config, hyper)
    agent = DqnAgent(
        spec, hyper, seed=agent_seed(seed, 0),
        params=init_params(spec, param_seed(seed)),
    )
    env = build_env(env_config, train_env_seed(seed, 0))

    reports: list[RoundReport] = []
    for n in range(fml.rounds):
        env.reset_demands()
        cb = None
        if on_episode is not None:
            cb = lambda e, st, _n=n: on_episode(_n, 0, e, st)
        if method == "reptile":
            stats = _train_task_blocks(agent, env, fml, fml.episodes_per_round, cb)
        else:
            stats = []
            for e in range(fml.episodes_per_round):
                st = run_episode(agent, env, task_spec(1))
                stats.append(st)
                if cb is not None:
                    cb(e, st)
        reports.append(RoundReport(n, [stats]))
    return agent.params, reports
