"""State encoding, action masking, rewards and QoS metrics.

``TestScriptedEpisode`` walks a fully hand-traced scenario: one vehicle
parked next to the base station, two hand-built jobs, frames of exactly
1.024 ms.  Every expected number below was derived on paper from the
event rules, never from running the code.
"""

import math

import numpy as np
import pytest

from helpers import hand_job, micro_env_config, place_vehicle, script_buffer
from ratsteer.config import ConfigError, EnvConfig
from ratsteer.env import EventRecord, FRAME_DELIVERED, JOB_COMPLETED, JOB_LOST, build_env
from ratsteer.mdp import (
    RewardComponents,
    TASKS,
    action_index,
    caching_rate,
    decode_action,
    encode_state,
    fairness,
    legal_actions,
    noop_index,
    observe,
    reward_components,
    task_reward,
    task_spec,
    throughput,
)


class TestEncodeState:
    def test_length_and_layout(self):
        env = build_env(EnvConfig(), 0)
        s = encode_state(env)
        assert s.shape == (47,)
        # vehicle block: positions in [0, 1], velocities in [-1, 1]
        for i in range(5):
            assert 0.0 <= s[4 * i] <= 1.0
            assert 0.0 <= s[4 * i + 1] <= 1.0
            assert s[4 * i + 2] in (-1.0, 0.0, 1.0)
            assert s[4 * i + 3] in (-1.0, 0.0, 1.0)
        # buffer block scaled to [0, 1]
        assert np.all(s[20:35] >= 0.0) and np.all(s[20:35] <= 1.0)
        # rates scaled to [0, 1]
        assert np.all(s[37:] >= 0.0) and np.all(s[37:] <= 1.0)

    def test_idle_flags(self):
        env = build_env(EnvConfig(), 0)
        s = encode_state(env)
        assert (s[35], s[36]) == (1.0, 1.0)
        # occupy LTE
        slot = next(i for i, j in enumerate(env.buffer) if True)
        env.begin_transmission(0, slot)
        s = encode_state(env)
        assert (s[35], s[36]) == (0.0, 1.0)

    def test_out_of_nr_coverage_rate_entry_zero(self):
        env = build_env(EnvConfig(), 1)
        place_vehicle(env, 3, 900.0, 500.0, -8.0, 0.0)   # d = 400
        s = encode_state(env)
        assert s[37 + 2 * 3 + 1] == 0.0      # vehicle 3's NR entry
        assert s[37 + 2 * 3] > 0.0           # its LTE entry

    def test_purity(self):
        env = build_env(EnvConfig(), 2)
        assert np.array_equal(encode_state(env), encode_state(env))

    def test_observe_consistent_with_parts(self):
        env = build_env(EnvConfig(), 3)
        s, m = observe(env)
        assert np.array_equal(s, encode_state(env))
        assert np.array_equal(m, legal_actions(env))

    def test_rate_features_match_link_budget(self):
        from ratsteer.mdp import _distances, _rate_matrix
        from ratsteer.radio import data_rate

        for seed in range(5):
            env = build_env(EnvConfig(), seed)
            rates = _rate_matrix(env, _distances(env))
            for j, rat in enumerate(env.config.rats):
                for i in range(env.config.n_vehicles):
                    want = data_rate(rat, env.distance_to_bs(i))
                    assert rates[j, i] == pytest.approx(want, rel=1e-12, abs=0.0)


class TestActionSpace:
    def test_indexing_roundtrip(self):
        cfg = EnvConfig()
        assert noop_index(cfg) == 10
        assert decode_action(10, cfg) is None
        for slot in range(5):
            for rat in range(2):
                idx = action_index(slot, rat, cfg)
                assert decode_action(idx, cfg) == (slot, rat)
        with pytest.raises(ConfigError):
            decode_action(11, cfg)


class TestLegalActions:
    def test_both_rats_busy_only_noop(self):
        env = build_env(EnvConfig(), 4)
        for v in env.vehicles:
            v.x, v.y = 520.0, 500.0          # everyone in NR coverage
        env.begin_transmission(0, 0)
        env.begin_transmission(1, 0)
        mask = legal_actions(env)
        assert mask[noop_index(env.config)]
        assert mask.sum() == 1

    def test_out_of_nr_coverage_masks_nr(self):
        env = build_env(EnvConfig(), 5)
        for v in env.vehicles:
            v.x, v.y = 900.0, 500.0          # d = 400 for all owners
        mask = legal_actions(env)
        for slot in range(5):
            assert not mask[action_index(slot, 1, env.config)]
            assert mask[action_index(slot, 0, env.config)]

    def test_idle_lte_all_on_map_gives_six_legal(self):
        env = build_env(EnvConfig(), 6)
        for v in env.vehicles:
            v.x, v.y = 900.0, 500.0          # outside NR, inside LTE
        env.begin_transmission(0, 0)         # make LTE busy first ...
        env.rat_busy_until[1] = env.rat_busy_until[0]   # ... and NR busy too
        env.rat_busy_until[0] = 0.0          # LTE idle again
        env.active[0] = None
        mask = legal_actions(env)
        assert mask.sum() == 6               # 5 LTE schedules + no-op
        legal = {decode_action(i, env.config) for i in np.flatnonzero(mask)} - {None}
        assert legal == {(slot, 0) for slot in range(5)}

    def test_legal_action_never_raises(self):
        rng = np.random.default_rng(8)
        for seed in range(30):
            env = build_env(EnvConfig(), seed)
            for _ in range(int(rng.integers(0, 60))):
                env.advance()
            mask = legal_actions(env)
            idx = int(rng.choice(np.flatnonzero(mask)))
            pair = decode_action(idx, env.config)
            if pair is not None:
                env.begin_transmission(pair[1], pair[0])   # must not raise


def busy_env(busy_rats=(), sim_time=0.001):
    """Environment stub positioned one step in, with chosen RATs busy."""
    env = build_env(EnvConfig(), 9)
    env.sim_time_s = sim_time
    for j in busy_rats:
        env.rat_busy_until[j] = sim_time + 0.0005
    return env


class TestRewardComponents:
    def test_lost_job_both_rats_busy(self):
        env = busy_env(busy_rats=(0, 1))
        events = [EventRecord(kind=JOB_LOST, slot=0, job_id=1, owner=0, nbytes=1000)]
        c = reward_components(events, env)
        assert c.r1_unused_rat == 0.0
        assert c.r2_lost == -100.0

    def test_completion_at_half_deadline(self):
        env = busy_env(busy_rats=(0,))
        events = [EventRecord(kind=JOB_COMPLETED, slot=0, job_id=1, owner=0,
                              nbytes=51200, latency_ratio=0.5)]
        c = reward_components(events, env)
        assert c.r3_success == 10.0
        assert c.r4_latency == 5.0

    def test_quiet_step_both_idle(self):
        env = busy_env(busy_rats=())
        c = reward_components([], env)
        assert c.r1_unused_rat == -2.0
        assert c.r2_lost == 0.0
        assert c.r3_success == 0.0
        assert c.r4_latency == 0.0
        assert c.r5_throughput == 0.0
        assert c.r6_fairness == 0.0       # all flows at the 1-byte floor

    def test_throughput_and_fairness_from_frames(self):
        env = busy_env(busy_rats=(0,))
        events = [
            EventRecord(kind=FRAME_DELIVERED, rat=0, slot=0, job_id=1, owner=2,
                        nbytes=51200),
            EventRecord(kind=FRAME_DELIVERED, rat=1, slot=1, job_id=2, owner=4,
                        nbytes=51200),
        ]
        c = reward_components(events, env)
        # 102400 bytes in 1 ms = 102.4 MB/s
        assert c.r5_throughput == pytest.approx(0.1 * 102.4, rel=1e-12)
        assert c.r6_fairness == pytest.approx(2 * math.log(51200), rel=1e-12)

    def test_sign_invariants_random_events(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            env = busy_env(busy_rats=tuple(j for j in (0, 1) if rng.random() < 0.5))
            events = []
            for _ in range(int(rng.integers(0, 6))):
                kind = [JOB_LOST, JOB_COMPLETED, FRAME_DELIVERED][int(rng.integers(3))]
                events.append(EventRecord(
                    kind=kind, slot=0, job_id=1, owner=int(rng.integers(5)),
                    nbytes=51200, latency_ratio=float(rng.uniform(0.01, 1.0)),
                ))
            c = reward_components(events, env)
            assert c.r1_unused_rat <= 0.0
            assert c.r2_lost <= 0.0
            assert c.r3_success >= 0.0
            assert c.r4_latency >= 0.0


class TestTaskReward:
    def test_task_compositions(self):
        assert TASKS[1].components == {1, 2, 3, 4, 5, 6}
        assert TASKS[2].components == {1, 6}
        assert TASKS[3].components == {1, 4}
        assert TASKS[4].components == {1, 5}
        assert TASKS[5].components == {1, 2, 3}

    def test_selective_sum(self):
        c = RewardComponents(-1.0, -100.0, 10.0, 5.0, 3.0, 7.0)
        assert task_reward(c, task_spec(3)) == 4.0
        assert task_reward(c, task_spec(1)) == pytest.approx(sum(c.as_tuple()))
        c5 = RewardComponents(0.0, -100.0, 10.0, 99.0, 99.0, 99.0)
        assert task_reward(c5, task_spec(5)) == -90.0

    def test_unknown_task_rejected(self):
        with pytest.raises(ConfigError):
            task_spec(6)


class TestMetrics:
    def test_packet_rate_over_resolved_jobs(self):
        env = build_env(EnvConfig(), 0)
        env.counters.jobs_completed = 8
        env.counters.jobs_lost = 2
        packets, _ = caching_rate(env)
        assert packets == pytest.approx(0.8)

    def test_no_losses_gives_unity(self):
        env = build_env(EnvConfig(), 0)
        env.counters.jobs_completed = 4
        env.counters.bytes_completed_jobs = 4 * 1_024_000
        packets, nbytes = caching_rate(env)
        assert packets == 1.0 and nbytes == 1.0

    def test_unresolved_reported_absent(self):
        env = build_env(EnvConfig(), 0)
        assert caching_rate(env) == (None, None)

    def test_throughput_simple(self):
        env = build_env(EnvConfig(), 0)
        env.counters.bytes_completed_jobs = 1_000_000
        assert throughput(env, 1.0) == pytest.approx(1e6)
        with pytest.raises(ConfigError):
            throughput(env, 0.0)

    def test_fairness_cases(self):
        assert fairness([1.0] * 5) == 0.0
        assert fairness([math.e] * 5) == pytest.approx(5.0, rel=1e-12)
        out = fairness([0.0, 51200.0])
        assert math.isfinite(out)
        assert out == pytest.approx(math.log(51200), rel=1e-12)


class TestScriptedEpisode:
    """Hand-traced six-step scenario; see the module docstring."""

    def setup_env(self):
        env = build_env(micro_env_config(), 42)
        place_vehicle(env, 0, 500.05, 500.0, 8.0, 0.0)
        script_buffer(env, [
            hand_job(env, 100, 0, "A", 2, 0.01),    # 2 frames, 10 steps
            hand_job(env, 101, 0, "B", 3, 0.004),   # 3 frames, 4 steps
        ])
        return env

    def test_full_trace(self):
        env = self.setup_env()
        frame = 51200 * 8 / 4e8                     # 1.024 ms

        # step 1: first frame of job 100 in flight
        eta = env.begin_transmission(0, 0)
        assert eta == pytest.approx(frame, rel=1e-12)
        assert kinds_of(env.advance()) == []

        # step 2: frame lands at 1.024 ms
        ev = env.advance()
        assert kinds_of(ev) == [FRAME_DELIVERED]
        assert env.buffer[0].frames_remaining == 1
        assert env.counters.bytes_delivered == 51200

        # step 3: serve job 101 once
        env.begin_transmission(0, 1)
        assert kinds_of(env.advance()) == []

        # step 4: job 101's second frame lands, then its deadline expires
        ev = env.advance()
        assert kinds_of(ev) == [FRAME_DELIVERED, JOB_LOST]
        assert ev[1].job_id == 101
        assert ev[1].nbytes == 2 * 51200            # undelivered remainder
        c = env.counters
        assert c.jobs_lost == 1
        assert c.bytes_delivered_lost_jobs == 51200
        assert c.bytes_undelivered_lost_jobs == 102400
        assert c.total_requests == 3

        # step 5: finish job 100
        env.begin_transmission(0, 0)
        assert kinds_of(env.advance()) == []

        # step 6: completion at 5.024 ms of a 10 ms deadline
        ev = env.advance()
        assert kinds_of(ev) == [FRAME_DELIVERED, JOB_COMPLETED]
        done = ev[1]
        assert done.job_id == 100
        assert done.latency_ratio == pytest.approx(0.5024, rel=1e-9)
        comps = reward_components(ev, env)
        assert comps.r1_unused_rat == 0.0
        assert comps.r3_success == 10.0
        assert comps.r4_latency == pytest.approx(10.0 * (1 - 0.5024), rel=1e-9)
        assert comps.r5_throughput == pytest.approx(0.1 * 51.2, rel=1e-12)
        assert comps.r6_fairness == pytest.approx(math.log(51200), rel=1e-12)

        # end-of-trace metrics, all hand-computed
        packets, nbytes = caching_rate(env)
        assert packets == pytest.approx(0.5, rel=1e-12)        # 1 of 2 resolved
        assert nbytes == pytest.approx(0.4, rel=1e-12)         # 102400 / 256000
        assert throughput(env, 0.006) == pytest.approx(25_600_000.0, rel=1e-12)
        c = env.counters
        assert c.bytes_completed_jobs == 102400
        assert c.bytes_delivered == 153600
        assert c.total_requests == 4
        assert c.total_requests == c.jobs_completed + c.jobs_lost + len(env.buffer)
        owed = sum(j.remaining_bytes for j in env.buffer)
        assert c.bytes_delivered + c.bytes_undelivered_lost_jobs + owed \
            == c.bytes_requested_total


def kinds_of(events):
    return [e.kind for e in events]
