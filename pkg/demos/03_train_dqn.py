"""Train one DQN agent on the all-components reward and watch it learn.

Takes a couple of minutes.  The learned policy is then compared against
the rule-based scheduler on a fresh environment, greedy and frozen.
"""

import dataclasses

from ratsteer import DqnAgent, build_env, desk_profile, run_episode, run_heuristic_episode
from ratsteer.federation import net_spec_for, train_env_seed
from ratsteer.mdp import task_spec

exp = desk_profile()
hyper = dataclasses.replace(exp.dqn, lr=1e-3)
spec = net_spec_for(exp.env, hyper)
agent = DqnAgent(spec, hyper, seed=0)
env = build_env(exp.env, train_env_seed(0, 0))
task = task_spec(1)

print("episode   return  caching  lost  epsilon")
for ep in range(30):
    st = run_episode(agent, env, task)
    if ep % 3 == 0:
        caching = "  n/a" if st.caching_packets is None else f"{st.caching_packets:5.2f}"
        print(f"{ep:>7} {st.ep_return:>8.0f} {caching:>8} {st.jobs_lost:>5} "
              f"{st.epsilon_end:>8.2f}")

eval_env = build_env(exp.env, train_env_seed(0, 0) + 2)   # unseen trajectory
greedy = run_episode(agent, eval_env, task_spec(5), learn=False, greedy=True)
heur = run_heuristic_episode(build_env(exp.env, train_env_seed(0, 0) + 2))
print(f"\ngreedy agent on a fresh environment: "
      f"{greedy.jobs_completed} completed / {greedy.jobs_lost} lost")
print(f"rule-based scheduler on the same:    "
      f"{heur.jobs_completed} completed / {heur.jobs_lost} lost")
