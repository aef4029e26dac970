"""Multi-RAT traffic steering: simulator, DQN agents, Reptile and FedAvg."""

from .config import (
    DqnHyper,
    EnvConfig,
    EvalSettings,
    ExperimentConfig,
    FmlConfig,
    RatConfig,
    desk_profile,
    load_experiment_config,
    paper_profile,
)
from .env import Environment, IllegalAction, build_env
from .radio import data_rate, path_loss, sinr
from .mdp import (
    RewardComponents,
    TaskSpec,
    caching_rate,
    encode_state,
    fairness,
    legal_actions,
    reward_components,
    task_reward,
    task_spec,
    throughput,
)
from .heuristic import heuristic_action, run_heuristic_episode
from .network import NetSpec, forward, init_params, load_checkpoint, save_checkpoint, td_step
from .agent import DqnAgent, ReplayBuffer, bellman_target, run_episode, select_action
from .federation import fedavg, reptile_update, run_baseline, run_fml
from .harness import build_protocol, episodes_to_hep, evaluate_zero_shot, run_comparison

__version__ = "0.1.0"

__all__ = [
    "DqnAgent",
    "DqnHyper",
    "EnvConfig",
    "Environment",
    "EvalSettings",
    "ExperimentConfig",
    "FmlConfig",
    "IllegalAction",
    "NetSpec",
    "RatConfig",
    "ReplayBuffer",
    "RewardComponents",
    "TaskSpec",
    "bellman_target",
    "build_env",
    "build_protocol",
    "caching_rate",
    "data_rate",
    "desk_profile",
    "encode_state",
    "episodes_to_hep",
    "evaluate_zero_shot",
    "fairness",
    "fedavg",
    "forward",
    "heuristic_action",
    "init_params",
    "legal_actions",
    "load_checkpoint",
    "load_experiment_config",
    "paper_profile",
    "path_loss",
    "reptile_update",
    "reward_components",
    "run_baseline",
    "run_comparison",
    "run_episode",
    "run_fml",
    "run_heuristic_episode",
    "save_checkpoint",
    "select_action",
    "sinr",
    "task_reward",
    "task_spec",
    "td_step",
    "throughput",
]
