"""Configuration dataclasses and INI-file loading.

All physical and experiment parameters live here.  Defaults reproduce the
reference scenario: a 1 km x 1 km map, 5 vehicles at 8 m/s, a 5-slot job
buffer, 1 MB / 10 MB jobs with 0.1 s / 1 s deadlines and a 1 ms action
interval.  The two default RAT parameter sets are calibrated so that the
5G NR data rate exceeds LTE close to the base station and falls below it
near the edge of NR coverage (crossover at roughly 150 m).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


# Distance floor used by the path-loss model to avoid the d -> 0 singularity.
MIN_DISTANCE_M = 1.0

MAP_SIZE_M = 1000.0

LTE = 0
NR = 1


@dataclass(frozen=True)
class RatConfig:
    """Physical-layer constants for one radio access technology."""

    id: int
    name: str
    bandwidth_hz: float
    tx_power_w: float
    antenna_gain: float
    pathloss_c: float
    pathloss_alpha: float
    noise_w: float
    interference_w: float = 0.0
    fading_h: float = 1.0
    max_range_m: float = MAP_SIZE_M

    def validate(self) -> None:
        if self.bandwidth_hz <= 0:
            raise ConfigError(f"RAT {self.name}: bandwidth must be positive")
        if self.tx_power_w < 0:
            raise ConfigError(f"RAT {self.name}: tx power must be >= 0")
        if self.pathloss_alpha < 2:
            raise ConfigError(f"RAT {self.name}: path-loss exponent must be >= 2")
        if self.noise_w <= 0:
            raise ConfigError(f"RAT {self.name}: noise power must be positive")
        if self.max_range_m <= 0:
            raise ConfigError(f"RAT {self.name}: max range must be positive")


def default_lte() -> RatConfig:
    return RatConfig(
        id=LTE,
        name="lte",
        bandwidth_hz=20e6,
        tx_power_w=40.0,
        antenna_gain=16.0,
        pathloss_c=3.6e-9,
        pathloss_alpha=2.0,
        noise_w=1e-13,
        max_range_m=922.0,
    )


def default_nr() -> RatConfig:
    return RatConfig(
        id=NR,
        name="nr",
        bandwidth_hz=100e6,
        tx_power_w=10.0,
        antenna_gain=25.0,
        pathloss_c=2.4e-6,
        pathloss_alpha=4.0,
        noise_w=4e-13,
        max_range_m=200.0,
    )


@dataclass(frozen=True)
class EnvConfig:
    """Scenario parameters for one simulated environment."""

    n_vehicles: int = 5
    buffer_size: int = 5
    dt_s: float = 0.001
    vehicle_speed_mps: float = 8.0
    frame_bytes: int = 51200          # 50 KB data frames
    type_a_frames: int = 20           # ~1 MB job
    type_b_frames: int = 200          # ~10 MB job
    type_a_deadline_s: float = 0.1
    type_b_deadline_s: float = 1.0
    episode_len_steps: int = 2000
    rayleigh_fading: bool = False
    frame_timeout_multiple: float = 10.0
    rats: tuple[RatConfig, ...] = field(
        default_factory=lambda: (default_lte(), default_nr())
    )

    @property
    def n_rats(self) -> int:
        return len(self.rats)

    @property
    def n_actions(self) -> int:
        # one (slot, rat) pair per combination, plus no-op
        return self.buffer_size * self.n_rats + 1

    @property
    def state_dim(self) -> int:
        # per-vehicle (x, y, vx, vy) + per-slot (frames, owner, deadline)
        # + per-RAT availability flag + per-(RAT, vehicle) link rate
        return (
            4 * self.n_vehicles
            + 3 * self.buffer_size
            + self.n_rats
            + self.n_rats * self.n_vehicles
        )

    def validate(self) -> None:
        if self.n_vehicles < 1:
            raise ConfigError("need at least one vehicle")
        if self.buffer_size < 1:
            raise ConfigError("buffer size must be >= 1")
        if self.dt_s <= 0:
            raise ConfigError("dt must be positive")
        if self.vehicle_speed_mps <= 0:
            raise ConfigError("vehicle speed must be positive")
        if self.frame_bytes <= 0:
            raise ConfigError("frame size must be positive")
        if self.type_a_frames < 1 or self.type_b_frames < 1:
            raise ConfigError("job frame counts must be >= 1")
        if self.type_a_deadline_s <= 0 or self.type_b_deadline_s <= 0:
            raise ConfigError("job deadlines must be positive")
        if self.episode_len_steps < 1:
            raise ConfigError("episode length must be >= 1")
        if not self.rats:
            raise ConfigError("at least one RAT is required")
        for rat in self.rats:
            rat.validate()

    @property
    def max_deadline_s(self) -> float:
        return max(self.type_a_deadline_s, self.type_b_deadline_s)

    @property
    def max_frames(self) -> int:
        return max(self.type_a_frames, self.type_b_frames)


@dataclass(frozen=True)
class DqnHyper:
    """DQN training hyper-parameters.

    ``grad_clip`` caps the global gradient norm per step (0 disables).
    Without it the bootstrapped squared-error target diverges for the
    larger reward shapings; clipping preserves the update direction.
    """

    gamma: float = 0.95
    lr: float = 3e-4
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 50_000
    minibatch: int = 32
    replay_capacity: int = 50_000
    grad_clip: float = 10.0
    hidden: tuple[int, ...] = (128, 128)

    def validate(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must be in [0, 1)")
        if self.lr < 0:
            raise ConfigError("learning rate must be >= 0")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ConfigError("epsilon schedule must satisfy 0 <= end <= start <= 1")
        if self.minibatch < 1 or self.replay_capacity < self.minibatch:
            raise ConfigError("replay capacity must be >= minibatch size >= 1")
        if self.grad_clip < 0:
            raise ConfigError("gradient clip must be >= 0")


@dataclass(frozen=True)
class FmlConfig:
    """Federated meta-learning loop sizes."""

    rounds: int = 10              # N: aggregation cycles
    agents: int = 5               # K: parallel environments / agents
    episodes_per_round: int = 100  # E
    meta_tasks: int = 4           # I
    meta_step: float = 0.25       # beta
    training_tasks: tuple[int, ...] = (1, 2, 3, 4)
    eval_task: int = 5

    def validate(self) -> None:
        if min(self.rounds, self.agents, self.episodes_per_round, self.meta_tasks) < 1:
            raise ConfigError("N, K, E and I must all be >= 1")
        if not 0.0 < self.meta_step <= 1.0:
            raise ConfigError("meta step size must be in (0, 1]")
        if len(self.training_tasks) != self.meta_tasks:
            raise ConfigError("training task list must have exactly I entries")


@dataclass(frozen=True)
class EvalSettings:
    """Held-out evaluation protocol sizes.

    Adaptation uses its own exploration rate and step size: with a
    pre-trained model and a budget of a few episodes, fine-tuning wants
    more exploration and larger steps than the long training run.
    """

    eval_task: int = 5
    validation_runs: int = 10
    adaptation_budget: int = 15
    adaptation_epsilon: float = 0.2
    adaptation_lr: float = 1e-3

    def validate(self) -> None:
        if self.validation_runs < 1:
            raise ConfigError("need at least one validation run")
        if self.adaptation_budget < 0:
            raise ConfigError("adaptation budget must be >= 0")
        if not 0.0 <= self.adaptation_epsilon <= 1.0:
            raise ConfigError("adaptation epsilon must be in [0, 1]")
        if self.adaptation_lr < 0:
            raise ConfigError("adaptation learning rate must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    """Bundle of everything one training/evaluation run needs."""

    env: EnvConfig = field(default_factory=EnvConfig)
    dqn: DqnHyper = field(default_factory=DqnHyper)
    fml: FmlConfig = field(default_factory=FmlConfig)
    eval: EvalSettings = field(default_factory=EvalSettings)

    def validate(self) -> None:
        self.env.validate()
        self.dqn.validate()
        self.fml.validate()
        self.eval.validate()


def desk_profile() -> ExperimentConfig:
    """Small profile sized for a laptop-scale comparison run."""
    cfg = ExperimentConfig(
        env=replace(EnvConfig(), episode_len_steps=1000),
        dqn=replace(DqnHyper(), eps_decay_steps=30_000, hidden=(64, 64)),
        fml=replace(FmlConfig(), rounds=4, agents=3, episodes_per_round=20, meta_step=1.0),
    )
    cfg.validate()
    return cfg


def paper_profile() -> ExperimentConfig:
    """Full-scale profile (N=10, K=5, E=100)."""
    cfg = ExperimentConfig()
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# INI-file loading.  Sections: [env], [rat.<name>], [dqn], [fml], [eval].
# Any key may be omitted; defaults above apply.  `profile = desk|paper` in
# [experiment] selects the base profile before overrides.
# ---------------------------------------------------------------------------

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ConfigError(f"cannot parse boolean value {raw!r}")


def _coerce(raw: str, like) -> object:
    if isinstance(like, bool):
        return _parse_bool(raw)
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, tuple):
        return tuple(int(x) for x in raw.replace(",", " ").split())
    return raw


def _apply_section(obj, section: configparser.SectionProxy, skip=()):
    updates = {}
    for key, raw in section.items():
        if key in skip:
            continue
        if not hasattr(obj, key):
            raise ConfigError(f"unknown key {key!r} in section [{section.name}]")
        updates[key] = _coerce(raw, getattr(obj, key))
    return replace(obj, **updates) if updates else obj


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Load an :class:`ExperimentConfig` from an INI file."""
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"config file not found: {path}")

    base = "desk"
    if parser.has_section("experiment"):
        base = parser.get("experiment", "profile", fallback="desk").strip().lower()
    if base == "desk":
        cfg = desk_profile()
    elif base == "paper":
        cfg = paper_profile()
    else:
        raise ConfigError(f"unknown profile {base!r} (expected desk or paper)")

    env, dqn, fml, ev = cfg.env, cfg.dqn, cfg.fml, cfg.eval
    if parser.has_section("env"):
        env = _apply_section(env, parser["env"])
    rats = list(env.rats)
    for section in parser.sections():
        if not section.startswith("rat."):
            continue
        name = section[4:]
        idx = next((i for i, r in enumerate(rats) if r.name == name), None)
        if idx is None:
            raise ConfigError(f"unknown RAT {name!r} in [{section}]")
        rats[idx] = _apply_section(rats[idx], parser[section], skip=("id", "name"))
    env = replace(env, rats=tuple(rats))
    if parser.has_section("dqn"):
        dqn = _apply_section(dqn, parser["dqn"])
    if parser.has_section("fml"):
        fml = _apply_section(fml, parser["fml"])
    if parser.has_section("eval"):
        ev = _apply_section(ev, parser["eval"])

    cfg = ExperimentConfig(env=env, dqn=dqn, fml=fml, eval=ev)
    cfg.validate()
    return cfg


def load_env_config(path: str | Path) -> EnvConfig:
    """Load just the environment section of an INI file."""
    return load_experiment_config(path).env
