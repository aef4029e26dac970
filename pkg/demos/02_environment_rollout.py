"""Drive one environment with the rule-based scheduler and narrate it.

Vehicles crawl along the crossroad (8 mm per 1 ms step), jobs stream
through the five buffer slots, and the two transmitters interleave
frames.  The event log shows completions, losses and respawns; the
counters reconcile exactly with the jobs created.
"""

from collections import Counter

from ratsteer import EnvConfig, build_env, caching_rate, heuristic_action, throughput
from ratsteer.mdp import decode_action

env = build_env(EnvConfig(episode_len_steps=2000), seed=1)

print("initial fleet:")
for v in env.vehicles:
    print(f"  vehicle {v.id}: ({v.x:7.1f}, {v.y:7.1f}) m, "
          f"heading ({v.vx:+.0f}, {v.vy:+.0f}) m/s, d={env.distance_to_bs(v.id):5.1f} m")
print("initial buffer:")
for slot, job in enumerate(env.buffer):
    print(f"  slot {slot}: job {job.id} type {job.job_type} "
          f"({job.frames_remaining} frames, {job.deadline_remaining_s:.2f} s left, "
          f"owner {job.owner_vehicle})")

event_counts = Counter()
for step in range(2000):
    for _ in env.idle_rats():
        pair = decode_action(heuristic_action(env), env.config)
        if pair is not None:
            env.begin_transmission(pair[1], pair[0])
    for ev in env.advance():
        event_counts[ev.kind] += 1
        if ev.kind in ("job_completed", "job_lost") and event_counts[ev.kind] <= 5:
            t = env.sim_time_s
            print(f"  t={t:.3f}s {ev.kind} job {ev.job_id} (owner {ev.owner})")

print("\nevent totals over 2 s:", dict(event_counts))
packets, nbytes = caching_rate(env)
print(f"caching rate: {packets:.2f} packets / {nbytes:.2f} bytes")
print(f"throughput:   {throughput(env, env.sim_time_s) / 1e6:.1f} MB/s")
c = env.counters
owed = sum(j.remaining_bytes for j in env.buffer)
assert c.bytes_delivered + c.bytes_undelivered_lost_jobs + owed == c.bytes_requested_total
print("byte ledger balances: delivered + lost-undelivered + still-owed "
      "== all bytes ever requested")
