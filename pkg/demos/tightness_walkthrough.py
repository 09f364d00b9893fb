"""Why the initial matching cannot be kept verbatim.

On the three-agent construction the best allocation that respects the
initial matching loses a factor 3^(1/3) against the unconstrained optimum.
The solver keeps the matched items fixed, so it lands near the matched value.
"""
import math

from nsw_submodular import brute_force_nsw, brute_force_nsw_matched, run_pipeline, tightness_instance
from nsw_submodular.matching import initial_matching

inst = tightness_instance(3)
tau, H, _ = initial_matching(inst)
opt = brute_force_nsw(inst)
matched = brute_force_nsw_matched(inst, H)
print("initial matching:", list(tau), "H =", sorted(H))
print(f"OPT          = {opt.nsw:.6f}  bundles {[sorted(b) for b in opt.bundles]}")
print(f"OPT matched  = {matched.nsw:.6f}  bundles {[sorted(b) for b in matched.bundles]}")
print(f"ratio        = {opt.nsw / matched.nsw:.12f}  (3^(1/3) = {3 ** (1 / 3):.12f})")

rep = run_pipeline(inst)
print("solver allocation:", rep["best"]["allocation"])
print(f"solver NSW / OPT = {math.exp(rep['best']['log_nsw'] - opt.log_nsw):.4f}")
