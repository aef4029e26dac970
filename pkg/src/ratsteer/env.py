"""Discrete-time simulator: crossroad mobility, job buffer and radio links.

One ``Environment`` owns five vehicles driving a crossroad (two
perpendicular roads meeting at the base station in the map centre), a
fixed-size buffer of download jobs and one transmitter per RAT.  Time
advances in fixed steps of ``config.dt_s``; scheduling decisions are made
between steps via :meth:`Environment.begin_transmission`.

Bookkeeping rules:

* the buffer is always full -- a completed or expired job is immediately
  replaced by a fresh random one;
* the vehicle count is constant -- a vehicle leaving the map respawns at
  a random road entry point;
* a frame's data rate is frozen when its transmission starts; the frame
  is delivered at its ETA unless the owning job disappeared first;
* job deadlines count down in whole steps, so expiry is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import MAP_SIZE_M, ConfigError, EnvConfig
from .radio import data_rate

CENTER = MAP_SIZE_M / 2.0

# event kinds
JOB_COMPLETED = "job_completed"
JOB_LOST = "job_lost"
FRAME_DELIVERED = "frame_delivered"
VEHICLE_RESPAWNED = "vehicle_respawned"

_TIME_EPS = 1e-12


class IllegalAction(RuntimeError):
    """Raised when a transmission request violates the scheduler rules."""


@dataclass
class Vehicle:
    id: int
    x: float
    y: float
    vx: float
    vy: float
    road_segment: int = 0


@dataclass
class Job:
    id: int
    owner_vehicle: int
    job_type: str                  # "A" or "B"
    frames_total: int
    frames_remaining: int
    deadline_total_s: float
    deadline_steps_remaining: int
    deadline_remaining_s: float
    bytes_per_frame: int

    @property
    def size_bytes(self) -> int:
        return self.frames_total * self.bytes_per_frame

    @property
    def remaining_bytes(self) -> int:
        return self.frames_remaining * self.bytes_per_frame

    @property
    def delivered_bytes(self) -> int:
        return (self.frames_total - self.frames_remaining) * self.bytes_per_frame


@dataclass
class EventRecord:
    kind: str
    rat: int | None = None
    slot: int | None = None
    job_id: int | None = None
    owner: int | None = None
    nbytes: int = 0
    latency_ratio: float = 0.0
    vehicle: int | None = None


@dataclass
class Transmission:
    rat: int
    slot: int
    job_id: int
    owner: int
    eta_s: float
    nbytes: int
    delivers: bool = True


@dataclass
class Counters:
    jobs_completed: int = 0
    jobs_lost: int = 0
    total_requests: int = 0
    bytes_delivered: int = 0               # every successfully delivered frame
    bytes_completed_jobs: int = 0          # full size of completed jobs
    bytes_delivered_lost_jobs: int = 0     # frames delivered before the job expired
    bytes_undelivered_lost_jobs: int = 0   # what expired jobs still owed
    bytes_requested_total: int = 0         # full size of every job ever created

    def copy(self) -> "Counters":
        return Counters(**vars(self))


# headings as unit vectors; junction exits exclude the reverse direction
_EAST, _WEST, _NORTH, _SOUTH = (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)
_EXITS = {
    _EAST: (_EAST, _NORTH, _SOUTH),
    _WEST: (_WEST, _NORTH, _SOUTH),
    _NORTH: (_NORTH, _EAST, _WEST),
    _SOUTH: (_SOUTH, _EAST, _WEST),
}
# entry points on the road graph: (x, y, heading)
_ENTRIES = (
    (0.0, CENTER, _EAST),
    (MAP_SIZE_M, CENTER, _WEST),
    (CENTER, 0.0, _NORTH),
    (CENTER, MAP_SIZE_M, _SOUTH),
)


def _segment_of(x: float, y: float, vy: float) -> int:
    # 0/1 = west/east arm of the horizontal road, 2/3 = south/north arm
    if vy == 0.0:
        return 0 if x < CENTER else 1
    return 2 if y < CENTER else 3


class Environment:
    """One simulated cell; deterministic given (config, seed)."""

    def __init__(self, config: EnvConfig, seed: int):
        config.validate()
        if config.n_vehicles == 0 or not config.rats:
            raise ConfigError("environment needs vehicles and RATs")
        self.config = config
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.sim_time_s = 0.0
        self._next_job_id = 0
        self.counters = Counters()
        self.vehicles = [self._spawn_vehicle(i) for i in range(config.n_vehicles)]
        self.buffer = [self._new_job() for _ in range(config.buffer_size)]
        self.rat_busy_until = [0.0] * config.n_rats
        self.active: list[Transmission | None] = [None] * config.n_rats

    # -- construction helpers ------------------------------------------------

    def _spawn_vehicle(self, idx: int) -> Vehicle:
        speed = self.config.vehicle_speed_mps
        on_vertical = int(self.rng.integers(2))
        offset = float(self.rng.uniform(0.0, MAP_SIZE_M))
        sign = 1.0 if int(self.rng.integers(2)) else -1.0
        if on_vertical:
            v = Vehicle(idx, CENTER, offset, 0.0, sign * speed)
        else:
            v = Vehicle(idx, offset, CENTER, sign * speed, 0.0)
        v.road_segment = _segment_of(v.x, v.y, v.vy)
        return v

    def _entry_vehicle(self, idx: int) -> Vehicle:
        speed = self.config.vehicle_speed_mps
        x, y, (hx, hy) = _ENTRIES[int(self.rng.integers(len(_ENTRIES)))]
        v = Vehicle(idx, x, y, hx * speed, hy * speed)
        v.road_segment = _segment_of(v.x, v.y, v.vy)
        return v

    def _new_job(self) -> Job:
        cfg = self.config
        is_b = bool(self.rng.integers(2))
        owner = int(self.rng.integers(cfg.n_vehicles))
        frames = cfg.type_b_frames if is_b else cfg.type_a_frames
        deadline = cfg.type_b_deadline_s if is_b else cfg.type_a_deadline_s
        steps = max(1, round(deadline / cfg.dt_s))
        job = Job(
            id=self._next_job_id,
            owner_vehicle=owner,
            job_type="B" if is_b else "A",
            frames_total=frames,
            frames_remaining=frames,
            deadline_total_s=deadline,
            deadline_steps_remaining=steps,
            deadline_remaining_s=deadline,
            bytes_per_frame=cfg.frame_bytes,
        )
        self._next_job_id += 1
        self.counters.total_requests += 1
        self.counters.bytes_requested_total += job.size_bytes
        return job

    # -- queries -------------------------------------------------------------

    def distance_to_bs(self, vehicle_idx: int) -> float:
        v = self.vehicles[vehicle_idx]
        return math.hypot(v.x - CENTER, v.y - CENTER)

    def link_rate(self, rat_id: int, vehicle_idx: int) -> float:
        return data_rate(self.config.rats[rat_id], self.distance_to_bs(vehicle_idx))

    def rat_idle(self, rat_id: int) -> bool:
        return self.rat_busy_until[rat_id] <= self.sim_time_s + _TIME_EPS

    def idle_rats(self) -> list[int]:
        return [j for j in range(self.config.n_rats) if self.rat_idle(j)]

    # -- scheduling ----------------------------------------------------------

    def begin_transmission(self, rat_id: int, buffer_slot: int) -> float:
        """Start sending one frame of the job in ``buffer_slot`` over ``rat_id``.

        Returns the frame's delivery time (absolute simulation seconds).
        The data rate is sampled once, at the start of the transmission.
        """
        cfg = self.config
        if not 0 <= rat_id < cfg.n_rats:
            raise IllegalAction(f"unknown RAT {rat_id}")
        if not 0 <= buffer_slot < cfg.buffer_size:
            raise IllegalAction(f"bad buffer slot {buffer_slot}")
        if not self.rat_idle(rat_id):
            raise IllegalAction(f"RAT {rat_id} busy until {self.rat_busy_until[rat_id]:.6f}")
        job = self.buffer[buffer_slot]
        if job.frames_remaining <= 0:
            raise IllegalAction(f"job {job.id} has no frames left")
        rat = cfg.rats[rat_id]
        dist = self.distance_to_bs(job.owner_vehicle)
        nominal_rate = data_rate(rat, dist)
        if nominal_rate <= 0.0:
            raise IllegalAction(
                f"vehicle {job.owner_vehicle} out of RAT {rat_id} coverage (d={dist:.1f} m)"
            )
        frame_bits = job.bytes_per_frame * 8
        nominal = frame_bits / nominal_rate
        if cfg.rayleigh_fading:
            h = float(self.rng.rayleigh(scale=math.sqrt(2.0 / math.pi)))
            faded_rate = data_rate(rat, dist, fading_h=h)
            duration = frame_bits / faded_rate if faded_rate > 0.0 else math.inf
        else:
            duration = nominal
        # frames slower than the timeout are dropped and must be re-sent
        timeout = cfg.frame_timeout_multiple * nominal
        delivers = duration <= timeout
        span = duration if delivers else timeout
        eta = self.sim_time_s + span
        self.rat_busy_until[rat_id] = eta
        self.active[rat_id] = Transmission(
            rat=rat_id,
            slot=buffer_slot,
            job_id=job.id,
            owner=job.owner_vehicle,
            eta_s=eta,
            nbytes=job.bytes_per_frame,
            delivers=delivers,
        )
        return eta

    # -- time evolution ------------------------------------------------------

    def advance(self, dt_s: float | None = None) -> list[EventRecord]:
        """Advance the world by one step and return what happened."""
        dt = self.config.dt_s if dt_s is None else dt_s
        if abs(dt - self.config.dt_s) > _TIME_EPS:
            raise ConfigError(f"advance step {dt} != configured dt {self.config.dt_s}")
        t0 = self.sim_time_s
        events: list[EventRecord] = []

        self._move_vehicles(dt, events)

        replaced_slots = self._resolve_deliveries(t0, dt, events)
        self._expire_deadlines(dt, replaced_slots, events)

        self.sim_time_s = t0 + dt
        return events

    def _move_vehicles(self, dt: float, events: list[EventRecord]) -> None:
        speed = self.config.vehicle_speed_mps
        for i, v in enumerate(self.vehicles):
            nx, ny = v.x + v.vx * dt, v.y + v.vy * dt
            if v.vy == 0.0:
                crossed = (v.x - CENTER) * (nx - CENTER) < 0.0
                overshoot = abs(nx - CENTER)
            else:
                crossed = (v.y - CENTER) * (ny - CENTER) < 0.0
                overshoot = abs(ny - CENTER)
            if crossed:
                heading = (
                    math.copysign(1.0, v.vx) if v.vy == 0.0 else 0.0,
                    math.copysign(1.0, v.vy) if v.vx == 0.0 else 0.0,
                )
                exits = _EXITS[heading]
                hx, hy = exits[int(self.rng.integers(len(exits)))]
                nx = CENTER + hx * overshoot
                ny = CENTER + hy * overshoot
                v.vx, v.vy = hx * speed, hy * speed
            if not (0.0 <= nx <= MAP_SIZE_M and 0.0 <= ny <= MAP_SIZE_M):
                self.vehicles[i] = self._entry_vehicle(i)
                events.append(EventRecord(kind=VEHICLE_RESPAWNED, vehicle=i))
                continue
            v.x, v.y = nx, ny
            v.road_segment = _segment_of(v.x, v.y, v.vy)

    def _resolve_deliveries(self, t0: float, dt: float,
                            events: list[EventRecord]) -> set[int]:
        due = [
            tx for tx in self.active
            if tx is not None and tx.eta_s <= t0 + dt + _TIME_EPS
        ]
        due.sort(key=lambda tx: (tx.eta_s, tx.rat))
        replaced: set[int] = set()
        for tx in due:
            self.active[tx.rat] = None
            job = self.buffer[tx.slot]
            if not tx.delivers or job.id != tx.job_id:
                continue  # frame timed out, or its job already got replaced
            # the job must still be alive when the frame lands
            expiry = t0 + job.deadline_remaining_s
            if tx.eta_s > expiry + _TIME_EPS:
                continue
            job.frames_remaining -= 1
            self.counters.bytes_delivered += tx.nbytes
            events.append(EventRecord(
                kind=FRAME_DELIVERED,
                rat=tx.rat,
                slot=tx.slot,
                job_id=job.id,
                owner=job.owner_vehicle,
                nbytes=tx.nbytes,
            ))
            if job.frames_remaining == 0:
                remaining_at_eta = job.deadline_remaining_s - (tx.eta_s - t0)
                latency = (job.deadline_total_s - remaining_at_eta) / job.deadline_total_s
                self.counters.jobs_completed += 1
                self.counters.bytes_completed_jobs += job.size_bytes
                events.append(EventRecord(
                    kind=JOB_COMPLETED,
                    rat=tx.rat,
                    slot=tx.slot,
                    job_id=job.id,
                    owner=job.owner_vehicle,
                    nbytes=job.size_bytes,
                    latency_ratio=latency,
                ))
                self.buffer[tx.slot] = self._new_job()
                replaced.add(tx.slot)
        return replaced

    def _expire_deadlines(self, dt: float, replaced: set[int],
                          events: list[EventRecord]) -> None:
        for slot, job in enumerate(self.buffer):
            if slot in replaced:
                continue  # fresh jobs start counting next step
            job.deadline_steps_remaining -= 1
            job.deadline_remaining_s = job.deadline_steps_remaining * self.config.dt_s
            if job.deadline_steps_remaining > 0:
                continue
            self.counters.jobs_lost += 1
            self.counters.bytes_delivered_lost_jobs += job.delivered_bytes
            self.counters.bytes_undelivered_lost_jobs += job.remaining_bytes
            events.append(EventRecord(
                kind=JOB_LOST,
                slot=slot,
                job_id=job.id,
                owner=job.owner_vehicle,
                nbytes=job.remaining_bytes,
            ))
            self.buffer[slot] = self._new_job()

    # -- demand management ---------------------------------------------------

    def reset_demands(self) -> None:
        """Replace all buffered jobs with fresh random demands.

        Starts a new accounting epoch: counters restart so rates computed
        afterwards refer only to jobs created from this point on.
        """
        self.counters = Counters()
        self.buffer = [self._new_job() for _ in range(self.config.buffer_size)]


def build_env(config: EnvConfig, seed: int) -> Environment:
    """Construct a freshly seeded environment."""
    return Environment(config, seed)
