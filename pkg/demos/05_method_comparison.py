"""End-to-end comparison of the four methods at toy scale.

Trains federated meta-learning, the single-environment reptile variant
and a plain single agent with equal episode budgets, then scores
everything (plus the rule-based scheduler) on held-out environments:
zero-shot caching as a percentage of the heuristic, episodes of
fine-tuning until heuristic parity, and caching rates after adaptation.

This is a shrunken version of the experiment the acceptance suite runs;
expect noisy numbers at this scale.
"""

import dataclasses
import time

from ratsteer import desk_profile
from ratsteer.harness import format_summary, run_comparison

exp = desk_profile()
exp = dataclasses.replace(
    exp,
    fml=dataclasses.replace(exp.fml, rounds=2, agents=2, episodes_per_round=8),
    eval=dataclasses.replace(exp.eval, validation_runs=4, adaptation_budget=4),
)

t0 = time.time()
report = run_comparison(exp, seeds=[0, 1], out_dir="comparison_out")
print(f"finished in {(time.time() - t0) / 60:.1f} min; "
      f"CSV reports in comparison_out/\n")
print(format_summary(report))
