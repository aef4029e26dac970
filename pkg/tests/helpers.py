"""Shared white-box helpers for the test suite."""

import dataclasses

from ratsteer.config import EnvConfig, RatConfig
from ratsteer.env import Counters, Environment, Job


def exact_rate_rat(rat_id=0, name="x", bandwidth_hz=2e8, max_range_m=2000.0):
    """A RAT whose rate at the clamp distance is exactly 2 * bandwidth.

    SINR is 3 at d <= 1 m (C=3, everything else 1), so the Shannon rate is
    bandwidth * log2(4).  With the default bandwidth a 50 KB frame takes
    exactly 1.024 ms.
    """
    return RatConfig(
        id=rat_id, name=name, bandwidth_hz=bandwidth_hz, tx_power_w=1.0,
        antenna_gain=1.0, pathloss_c=3.0, pathloss_alpha=2.0, noise_w=1.0,
        interference_w=0.0, fading_h=1.0, max_range_m=max_range_m,
    )


def out_of_reach_rat(rat_id=1, name="far"):
    """A RAT nothing on the map can ever reach (range below the clamp)."""
    return RatConfig(
        id=rat_id, name=name, bandwidth_hz=1e6, tx_power_w=1.0,
        antenna_gain=1.0, pathloss_c=1.0, pathloss_alpha=2.0, noise_w=1.0,
        max_range_m=0.01,
    )


def place_vehicle(env: Environment, idx: int, x: float, y: float,
                  vx: float, vy: float) -> None:
    v = env.vehicles[idx]
    v.x, v.y, v.vx, v.vy = x, y, vx, vy


def hand_job(env: Environment, job_id: int, owner: int, jtype: str,
             frames: int, deadline_s: float) -> Job:
    steps = round(deadline_s / env.config.dt_s)
    return Job(
        id=job_id, owner_vehicle=owner, job_type=jtype, frames_total=frames,
        frames_remaining=frames, deadline_total_s=deadline_s,
        deadline_steps_remaining=steps, deadline_remaining_s=deadline_s,
        bytes_per_frame=env.config.frame_bytes,
    )


def script_buffer(env: Environment, jobs) -> None:
    """Replace the buffer with hand-built jobs and restart the counters."""
    assert len(jobs) == env.config.buffer_size
    env.buffer = list(jobs)
    env.counters = Counters(
        total_requests=len(jobs),
        bytes_requested_total=sum(j.size_bytes for j in jobs),
    )
    env._next_job_id = max(j.id for j in jobs) + 1


def env_fingerprint(env: Environment):
    """Full observable state, for bitwise-identity comparisons."""
    return (
        env.sim_time_s,
        tuple(dataclasses.astuple(v) for v in env.vehicles),
        tuple(dataclasses.astuple(j) for j in env.buffer),
        tuple(env.rat_busy_until),
        tuple(None if t is None else dataclasses.astuple(t) for t in env.active),
        dataclasses.astuple(env.counters),
        env.rng.bit_generator.state["state"]["state"],
    )


def micro_env_config(**overrides) -> EnvConfig:
    """Tiny single-vehicle scenario with exact frame timings."""
    base = dict(
        n_vehicles=1,
        buffer_size=2,
        type_a_frames=2,
        type_a_deadline_s=0.01,
        type_b_frames=3,
        type_b_deadline_s=0.004,
        episode_len_steps=50,
        rats=(exact_rate_rat(),),
    )
    base.update(overrides)
    return dataclasses.replace(EnvConfig(), **base)
