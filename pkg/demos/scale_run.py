"""A 10-agent, 50-item coverage instance solved with sampled estimators."""
import time

from nsw_submodular import GreedyConfig, PipelineConfig, generate_instance, run_pipeline
from nsw_submodular.pipeline import allocation_is_valid

inst = generate_instance("coverage", 10, 50, seed=2026)
cfg = PipelineConfig(GreedyConfig(estimator_mode="always-sample", samples_per_estimate=4096), seed=0)
t0 = time.perf_counter()
rep = run_pipeline(inst, cfg)
print(f"finished in {time.perf_counter() - t0:.1f}s")
trace = rep["greedy_trace"]
print("greedy iterations:", trace["iterations"])
print("log NSW:", round(rep["best"]["log_nsw"], 4))
print("bundle sizes:", [len(b) for b in rep["best"]["allocation"]])
print("discarded items:", len(rep["best"]["discarded"]))
print("problems:", allocation_is_valid(inst, rep) or "none")
