"""A small federated meta-learning run, narrated round by round.

Three agents train in their own environments on the four training
rewards; after every round the server averages their parameters into the
global model.  Within a round each agent adapts copies of its block
anchor to each task and moves the anchor toward the mean adapted
parameters (the meta step).
"""

import dataclasses

import numpy as np

from ratsteer import desk_profile, run_fml

exp = desk_profile()
fml = dataclasses.replace(exp.fml, rounds=2, episodes_per_round=8)

print(f"{fml.agents} agents x {fml.rounds} rounds x {fml.episodes_per_round} episodes, "
      f"tasks {fml.training_tasks}, meta step {fml.meta_step}")

def narrate(rnd, agent, episode, st):
    if episode == fml.episodes_per_round - 1:
        print(f"  round {rnd} agent {agent}: last episode task {st.task_id}, "
              f"return {st.ep_return:8.0f}, lost {st.jobs_lost}")

params, reports = run_fml(fml, exp.env, exp.dqn, seed=0, on_episode=narrate)

print(f"\nglobal model: {params.size} parameters, "
      f"|theta| = {np.linalg.norm(params):.2f}")
for report in reports:
    returns = [s.ep_return for stats in report.agent_stats for s in stats]
    print(f"round {report.round_index}: mean episode return {np.mean(returns):8.0f}")
