"""Solver versus brute force over the golden corpus, grouped by valuation family."""
import math
from collections import defaultdict

from nsw_submodular import PipelineConfig, golden_instances, run_pipeline

by_family = defaultdict(list)
for case in golden_instances():
    if case.exact.log_nsw == -math.inf:
        continue
    rep = run_pipeline(case.instance, PipelineConfig(seed=0))
    fam = next((t for t in case.tags if t not in ("random", "degenerate")), "other")
    by_family[fam].append(math.exp(rep["best"]["log_nsw"] - case.exact.log_nsw))

print(f"{'family':<24}{'count':>6}{'worst':>9}{'mean':>9}{'optimal':>9}")
for fam, ratios in sorted(by_family.items()):
    optimal = sum(r > 1 - 1e-9 for r in ratios)
    print(f"{fam:<24}{len(ratios):>6}{min(ratios):>9.4f}{sum(ratios) / len(ratios):>9.4f}{optimal:>9}")
print(f"guarantee: ratio >= 1/380 = {1 / 380:.5f}")
