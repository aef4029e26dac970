"""MDP view of the simulator: state encoding, action space, rewards, metrics.

The state vector packs, in order: per-vehicle kinematics (x, y, vx, vy),
per-buffer-slot job status (frames left, owner, time left), one
availability flag per RAT, and the link rate every vehicle would get on
every RAT.  All entries are scaled to O(1): positions by the map size,
velocities by the configured speed (signed, so in [-1, 1]), frame counts
by the largest job, deadlines by the longest deadline, rates by the best
rate any RAT can deliver.

Actions are flat indices: ``slot * n_rats + rat`` schedules one frame of
the job in ``slot`` over ``rat``; the final index is the explicit no-op.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import ConfigError, EnvConfig, MAP_SIZE_M, MIN_DISTANCE_M
from .env import (
    Counters,
    Environment,
    EventRecord,
    FRAME_DELIVERED,
    JOB_COMPLETED,
    JOB_LOST,
)
from .radio import max_data_rate

FAIRNESS_FLOW_FLOOR = 1.0   # bytes; keeps log(x) finite when a vehicle got nothing
_BYTES_PER_MB = 1e6


@lru_cache(maxsize=None)
def _norm_rate(rats) -> float:
    return max_data_rate(rats)


@lru_cache(maxsize=None)
def _rat_consts(rats):
    """Per-RAT physical constants as column vectors, for broadcasting."""
    col = lambda field: np.array([[getattr(r, field)] for r in rats])
    return {
        "bw": col("bandwidth_hz"),
        "gph": col("antenna_gain") * col("tx_power_w") * col("fading_h"),
        "c": col("pathloss_c"),
        "alpha": col("pathloss_alpha"),
        "noise": col("noise_w") + col("interference_w"),
        "rng": col("max_range_m"),
    }


def _distances(env: Environment) -> np.ndarray:
    return np.array(
        [math.hypot(v.x - MAP_SIZE_M / 2, v.y - MAP_SIZE_M / 2) for v in env.vehicles]
    )


def _rate_matrix(env: Environment, dists: np.ndarray) -> np.ndarray:
    """(n_rats, n_vehicles) data rates; matches ``radio.data_rate``."""
    k = _rat_consts(env.config.rats)
    d = np.maximum(dists, MIN_DISTANCE_M)
    s = k["gph"] * k["c"] * d ** (-k["alpha"]) / k["noise"]
    rates = k["bw"] * np.log2(1.0 + s)
    rates[dists[None, :] > k["rng"]] = 0.0
    return rates


def observe(env: Environment) -> tuple[np.ndarray, np.ndarray]:
    """State vector and legality mask in one pass (they share the rates)."""
    cfg = env.config
    out = np.empty(cfg.state_dim)
    i = 0
    for v in env.vehicles:
        out[i] = v.x / MAP_SIZE_M
        out[i + 1] = v.y / MAP_SIZE_M
        out[i + 2] = v.vx / cfg.vehicle_speed_mps
        out[i + 3] = v.vy / cfg.vehicle_speed_mps
        i += 4
    owner_scale = max(cfg.n_vehicles - 1, 1)
    for job in env.buffer:
        out[i] = job.frames_remaining / cfg.max_frames
        out[i + 1] = job.owner_vehicle / owner_scale
        out[i + 2] = job.deadline_remaining_s / cfg.max_deadline_s
        i += 3
    idle = [env.rat_idle(j) for j in range(cfg.n_rats)]
    for j in range(cfg.n_rats):
        out[i] = 1.0 if idle[j] else 0.0
        i += 1
    rates = _rate_matrix(env, _distances(env))
    out[i:] = rates.T.ravel() / _norm_rate(cfg.rats)

    mask = np.zeros(cfg.n_actions, dtype=bool)
    mask[-1] = True
    for j in range(cfg.n_rats):
        if not idle[j]:
            continue
        covered = rates[j] > 0.0
        for slot, job in enumerate(env.buffer):
            if covered[job.owner_vehicle]:
                mask[action_index(slot, j, cfg)] = True
    return out, mask


def encode_state(env: Environment) -> np.ndarray:
    """Deterministic fixed-length feature vector for the current state."""
    return observe(env)[0]


# -- action space ------------------------------------------------------------

def noop_index(cfg: EnvConfig) -> int:
    return cfg.buffer_size * cfg.n_rats


def action_index(slot: int, rat: int, cfg: EnvConfig) -> int:
    return slot * cfg.n_rats + rat


def decode_action(index: int, cfg: EnvConfig) -> tuple[int, int] | None:
    """Map a flat action index to (slot, rat); ``None`` for the no-op."""
    if index == noop_index(cfg):
        return None
    if not 0 <= index < noop_index(cfg):
        raise ConfigError(f"action index {index} out of range")
    return divmod(index, cfg.n_rats)


def legal_actions(env: Environment) -> np.ndarray:
    """Boolean mask over action indices; the no-op is always legal.

    Scheduling (slot, rat) is legal exactly when the RAT is idle and the
    slot's owner is inside that RAT's coverage, which is precisely the
    precondition of ``Environment.begin_transmission``.
    """
    return observe(env)[1]


# -- rewards -----------------------------------------------------------------

@dataclass(frozen=True)
class RewardComponents:
    r1_unused_rat: float = 0.0
    r2_lost: float = 0.0
    r3_success: float = 0.0
    r4_latency: float = 0.0
    r5_throughput: float = 0.0
    r6_fairness: float = 0.0

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.r1_unused_rat,
            self.r2_lost,
            self.r3_success,
            self.r4_latency,
            self.r5_throughput,
            self.r6_fairness,
        )


@dataclass(frozen=True)
class TaskSpec:
    """A reward shaping: which of the six components the task sums."""

    task_id: int
    components: frozenset[int]


TASKS: dict[int, TaskSpec] = {
    1: TaskSpec(1, frozenset({1, 2, 3, 4, 5, 6})),   # everything
    2: TaskSpec(2, frozenset({1, 6})),               # proportional fairness
    3: TaskSpec(3, frozenset({1, 4})),               # latency
    4: TaskSpec(4, frozenset({1, 5})),               # throughput
    5: TaskSpec(5, frozenset({1, 2, 3})),            # caching rate
}


def task_spec(task_id: int) -> TaskSpec:
    try:
        return TASKS[task_id]
    except KeyError:
        raise ConfigError(f"unknown task id {task_id}") from None


def fairness(per_vehicle_flow, floor: float = FAIRNESS_FLOW_FLOOR) -> float:
    """Proportional-fairness score: sum of log flows, floored to stay finite."""
    return float(sum(math.log(max(float(x), floor)) for x in per_vehicle_flow))


def reward_components(events: list[EventRecord], env_after: Environment) -> RewardComponents:
    """Score one decision step from its event log and the post-step state.

    A RAT counts as unused when it stayed idle for the whole step, i.e.
    its busy horizon predates the step.  Throughput is expressed in MB/s
    so the six components share a comparable scale.
    """
    cfg = env_after.config
    dt = cfg.dt_s
    step_start = env_after.sim_time_s - dt
    unused = sum(
        1 for t in env_after.rat_busy_until if t <= step_start + 1e-12
    )

    lost = completed = 0
    latency_sum = 0.0
    step_bytes = 0
    flows = [0.0] * cfg.n_vehicles
    for ev in events:
        if ev.kind == JOB_LOST:
            lost += 1
        elif ev.kind == JOB_COMPLETED:
            completed += 1
            latency_sum += 10.0 * (1.0 - ev.latency_ratio)
        elif ev.kind == FRAME_DELIVERED:
            step_bytes += ev.nbytes
            flows[ev.owner] += ev.nbytes

    return RewardComponents(
        r1_unused_rat=-float(unused),
        r2_lost=-100.0 * lost,
        r3_success=10.0 * completed,
        r4_latency=latency_sum,
        r5_throughput=0.1 * (step_bytes / dt) / _BYTES_PER_MB,
        r6_fairness=fairness(flows),
    )


def task_reward(components: RewardComponents, task: TaskSpec) -> float:
    """Sum of the components the task includes."""
    vals = components.as_tuple()
    return float(sum(vals[i - 1] for i in task.components))


# -- QoS metrics -------------------------------------------------------------

def caching_rate_from_counters(c: Counters) -> tuple[float | None, float | None]:
    """(packet rate, byte rate) over the resolved jobs in ``c``.

    Rates are over jobs that have already completed or expired; pending
    buffered jobs are excluded so the ratio is meaningful mid-episode.
    Returns ``(None, None)`` when nothing has resolved yet.
    """
    resolved = c.jobs_completed + c.jobs_lost
    if resolved == 0:
        return None, None
    packet_rate = c.jobs_completed / resolved
    resolved_bytes = (
        c.bytes_completed_jobs
        + c.bytes_delivered_lost_jobs
        + c.bytes_undelivered_lost_jobs
    )
    byte_rate = c.bytes_completed_jobs / resolved_bytes if resolved_bytes else None
    return packet_rate, byte_rate


def caching_rate(env: Environment) -> tuple[float | None, float | None]:
    return caching_rate_from_counters(env.counters)


def counters_delta(before: Counters, after: Counters) -> Counters:
    return Counters(**{k: getattr(after, k) - getattr(before, k) for k in vars(after)})


def throughput(env: Environment, window_s: float) -> float:
    """Successfully transmitted bytes of resolved jobs per second."""
    if window_s <= 0:
        raise ConfigError("throughput window must be positive")
    c = env.counters
    return (c.bytes_completed_jobs + c.bytes_delivered_lost_jobs) / window_s
