"""Acceptance suite: one test per criterion, one PASS line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines as
they complete.  Criterion 6 trains the full desk-scale comparison and
takes the bulk of the runtime (marked ``slow``).
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from helpers import hand_job, micro_env_config, place_vehicle, script_buffer
from ratsteer import oracle
from ratsteer.config import (
    DqnHyper,
    EnvConfig,
    EvalSettings,
    ExperimentConfig,
    FmlConfig,
    desk_profile,
)
from ratsteer.env import build_env
from ratsteer.federation import fedavg, reptile_update
from ratsteer.harness import run_comparison
from ratsteer.heuristic import heuristic_action
from ratsteer.mdp import caching_rate, decode_action, throughput
from ratsteer.network import NetSpec, forward, gradients, init_params
from ratsteer.radio import data_rate, path_loss, sinr

from test_heuristic import expected_choice, random_states
from test_radio import make_rat, ref_for


def report(criterion, detail, elapsed):
    print(f"\n[PASS] criterion {criterion}: {detail} ({elapsed:.1f} s)")


def test_criterion_1_formula_oracles():
    """Radio formulas vs the independent calculator; metrics vs hand traces."""
    t0 = time.time()
    rng = np.random.default_rng(11)
    cfg = EnvConfig()
    rats = list(cfg.rats)
    for _ in range(60):
        rats.append(make_rat(
            bandwidth_hz=float(rng.uniform(1e6, 2e8)),
            tx_power_w=float(rng.uniform(0.1, 100.0)),
            antenna_gain=float(rng.uniform(1.0, 60.0)),
            pathloss_c=float(10.0 ** rng.uniform(-12, -3)),
            pathloss_alpha=float(rng.uniform(2.0, 5.0)),
            noise_w=float(10.0 ** rng.uniform(-15, -9)),
            max_range_m=float(rng.uniform(50.0, 1500.0)),
        ))
    samples = 0
    for rat in rats:
        for d in rng.uniform(0.5, 1400.0, size=2):
            d = float(d)
            pl_ref, s_ref, r_ref = ref_for(rat, d)
            assert path_loss(rat, d) == pytest.approx(pl_ref, rel=1e-12)
            assert sinr(rat, d) == pytest.approx(s_ref, rel=1e-12)
            if r_ref == 0.0:
                assert data_rate(rat, d) == 0.0
            else:
                assert data_rate(rat, d) == pytest.approx(r_ref, rel=1e-12)
            samples += 1
    assert samples >= 100

    # hand-traced scripted episode (same scenario as tests/test_mdp.py):
    # two frames of job A delivered at 1.024/5.024 ms, job B expires at
    # 4 ms with one of three frames delivered
    env = build_env(micro_env_config(), 42)
    place_vehicle(env, 0, 500.05, 500.0, 8.0, 0.0)
    script_buffer(env, [
        hand_job(env, 100, 0, "A", 2, 0.01),
        hand_job(env, 101, 0, "B", 3, 0.004),
    ])
    env.begin_transmission(0, 0)
    env.advance(); env.advance()
    env.begin_transmission(0, 1)
    env.advance(); env.advance()
    env.begin_transmission(0, 0)
    env.advance()
    completion = env.advance()[-1]
    assert completion.latency_ratio == pytest.approx(0.5024, rel=1e-9)
    packets, nbytes = caching_rate(env)
    assert packets == pytest.approx(0.5, rel=1e-12)
    assert nbytes == pytest.approx(0.4, rel=1e-12)
    assert throughput(env, 0.006) == pytest.approx(25_600_000.0, rel=1e-12)
    assert oracle.ref_fairness([0.0, 51200.0]) == pytest.approx(
        math.log(51200), rel=1e-12)
    elapsed = time.time() - t0
    assert elapsed < 1.0
    report(1, f"{samples} radio samples at 1e-12; hand-traced metrics exact",
           elapsed)


def test_criterion_2_gradient_check():
    """Analytic vs central-difference gradients on 20+ random nets."""
    t0 = time.time()
    rng = np.random.default_rng(21)
    worst = 0.0
    for trial in range(22):
        spec = NetSpec(
            input_dim=int(rng.integers(2, 7)),
            hidden=tuple(int(h) for h in rng.integers(2, 8,
                                                      size=int(rng.integers(1, 3)))),
            output_dim=int(rng.integers(2, 5)),
        )
        params = init_params(spec, 1000 + trial)
        batch = int(rng.integers(1, 6))
        states = rng.normal(size=(batch, spec.input_dim))
        actions = rng.integers(spec.output_dim, size=batch)
        targets = rng.normal(size=batch)

        def loss_fn(p):
            q = forward(spec, np.asarray(p), states)
            err = q[np.arange(batch), actions] - targets
            return float(np.mean(err ** 2))

        grad, _ = gradients(spec, params, states, actions, targets)
        fd = np.array(oracle.central_difference_gradient(loss_fn, params.tolist()))
        denom = np.maximum(np.maximum(np.abs(fd), np.abs(grad)), 1e-8)
        worst = max(worst, float((np.abs(grad - fd) / denom).max()))
    elapsed = time.time() - t0
    assert worst < 1e-4
    assert elapsed < 10.0
    report(2, f"22 nets, max relative gradient error {worst:.2e}", elapsed)


def test_criterion_3_parameter_arithmetic():
    """Reptile/FedAvg identities to 1e-12."""
    t0 = time.time()
    rng = np.random.default_rng(31)
    theta = rng.normal(size=128)
    adapted = [rng.normal(size=128) for _ in range(4)]
    assert np.abs(
        reptile_update(theta, [theta.copy()] * 4, 0.6) - theta).max() < 1e-12
    assert np.abs(
        reptile_update(theta, adapted, 1.0) - np.mean(adapted, axis=0)
    ).max() < 1e-12
    want = np.array(oracle.ref_reptile(theta.tolist(),
                                       [a.tolist() for a in adapted], 0.25))
    assert np.abs(reptile_update(theta, adapted, 0.25) - want).max() < 1e-12

    models = [rng.normal(size=128) for _ in range(5)]
    avg = fedavg(models)
    assert np.abs(avg - fedavg(models[::-1])).max() < 1e-12
    assert np.all(avg >= np.min(models, axis=0) - 1e-12)
    assert np.all(avg <= np.max(models, axis=0) + 1e-12)
    assert np.abs(
        avg - np.array(oracle.ref_fedavg([m.tolist() for m in models]))
    ).max() < 1e-12
    m = models[0]
    assert np.abs(fedavg([m.copy()] * 3) - m).max() < 1e-12
    elapsed = time.time() - t0
    assert elapsed < 1.0
    report(3, "fixed point, beta=1 mean, convex hull, permutation, oracle",
           elapsed)


def test_criterion_4_heuristic_decision_table():
    """Zero violations of the NR-first/LTE-fallback/no-op table."""
    t0 = time.time()
    violations = 0
    for env in random_states(1000, base_seed=4000):
        got = decode_action(heuristic_action(env), env.config)
        if got != expected_choice(env):
            violations += 1
    elapsed = time.time() - t0
    assert violations == 0
    assert elapsed < 5.0
    report(4, "1000 random states, 0 violations", elapsed)


def test_criterion_5_conservation_suite():
    """Job/byte ledgers after 100k random-action steps across 10 seeds."""
    t0 = time.time()
    total_steps = 0
    for seed in range(10):
        env = build_env(EnvConfig(), seed)
        rng = np.random.default_rng(5000 + seed)
        for _ in range(10_000):
            for rat in env.idle_rats():
                if rng.random() < 0.4:
                    slot = min(range(env.config.buffer_size),
                               key=lambda s: env.buffer[s].frames_remaining)
                else:
                    slot = int(rng.integers(env.config.buffer_size + 1))
                    if slot == env.config.buffer_size:
                        continue
                job = env.buffer[slot]
                d = env.distance_to_bs(job.owner_vehicle)
                if d <= env.config.rats[rat].max_range_m:
                    env.begin_transmission(rat, slot)
            env.advance()
            total_steps += 1
        c = env.counters
        assert c.total_requests == c.jobs_completed + c.jobs_lost + len(env.buffer)
        owed = sum(j.remaining_bytes for j in env.buffer)
        assert c.bytes_delivered + c.bytes_undelivered_lost_jobs + owed \
            == c.bytes_requested_total
        full = sum(j.size_bytes for j in env.buffer)
        assert (c.bytes_completed_jobs + c.bytes_delivered_lost_jobs
                + c.bytes_undelivered_lost_jobs + full) == c.bytes_requested_total
        assert len(env.vehicles) == env.config.n_vehicles
    elapsed = time.time() - t0
    assert total_steps == 100_000
    assert elapsed < 30.0
    report(5, "100k steps over 10 seeds, all ledgers exact", elapsed)


@pytest.mark.slow
def test_criterion_6_desk_scale_ordering():
    """Method ordering on 5-seed means with the desk profile."""
    t0 = time.time()
    report_obj = run_comparison(desk_profile(), [1, 2, 3, 4, 5])
    s = report_obj.summary
    fml, rept, single = s["fml"], s["reptile"], s["single"]
    heur = s["heuristic"]
    lines = [
        f"zero-shot means: fml {fml.zero_shot_mean:.1f}%, "
        f"reptile {rept.zero_shot_mean:.1f}%, single {single.zero_shot_mean:.1f}%",
        f"HEP means: fml {fml.hep_mean:.2f}, reptile {rept.hep_mean:.2f}, "
        f"single {single.hep_mean:.2f}",
        f"final bytes: fml {fml.final_bytes:.3f} vs heuristic {heur.final_bytes:.3f}",
    ]
    print("\n" + "\n".join(lines))
    # (a) zero-shot ordering with a 5-point fml-vs-single margin
    assert fml.zero_shot_mean >= rept.zero_shot_mean
    assert rept.zero_shot_mean >= single.zero_shot_mean
    assert fml.zero_shot_mean - single.zero_shot_mean >= 5.0
    # (b) adaptation-speed ordering
    assert fml.hep_mean <= rept.hep_mean
    assert rept.hep_mean <= single.hep_mean
    # (c) adapted federated model at least matches the rule-based bytes
    assert fml.final_bytes >= heur.final_bytes
    elapsed = time.time() - t0
    report(6, "; ".join(lines), elapsed)


def test_criterion_7_deterministic_compare(tmp_path):
    """Identical seeds give byte-identical CSV outputs."""
    t0 = time.time()
    exp = ExperimentConfig(
        env=dataclasses.replace(EnvConfig(), episode_len_steps=400),
        dqn=DqnHyper(hidden=(16,), minibatch=16, replay_capacity=2048,
                     eps_decay_steps=2000),
        fml=FmlConfig(rounds=1, agents=2, episodes_per_round=2, meta_tasks=2,
                      training_tasks=(1, 2), meta_step=1.0),
        eval=EvalSettings(validation_runs=2, adaptation_budget=1),
    )
    run_comparison(exp, [3, 4], tmp_path / "a")
    run_comparison(exp, [3, 4], tmp_path / "b")
    compared = 0
    for path_a in sorted((tmp_path / "a").rglob("*")):
        if path_a.is_dir():
            continue
        rel = path_a.relative_to(tmp_path / "a")
        assert (tmp_path / "b" / rel).read_bytes() == path_a.read_bytes(), rel
        compared += 1
    elapsed = time.time() - t0
    assert compared >= 8
    report(7, f"{compared} output files byte-identical across reruns", elapsed)
