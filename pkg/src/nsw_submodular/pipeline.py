"""End-to-end solver: matching, continuous greedy, rounding, rematching.

Reports are plain dicts with fixed top-level keys::

    instance_meta, config, tau, H, A_prime, opt_zero, greedy_trace,
    trials, best, exact?, certificates?, notes, timing

Non-finite floats are written as the strings ``"-inf"``, ``"inf"``, ``"nan"``
so that report files are strict JSON.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NSWError, SizeLimitExceeded
from .instance import Instance
from .matching import LOG_TIE_TOL, Matching, final_matching, initial_matching
from .recombination import (
    matching_extension_bound,
    recombination_identities,
    recombine,
    verify_recombination,
)
from .reference import BRUTE_FORCE_LIMIT, NEG_INF, brute_force_nsw, nsw_value, optimum_fractional
from .relaxation import (
    GreedyConfig,
    active_agents,
    complement_items,
    iterated_continuous_greedy,
    iteration_bound,
    ratio_certificate,
)
from .rng import stream
from .rounding import (
    large_set_postconditions,
    pad_with_dummies,
    randomized_rounding,
    restricted_randomized_rounding,
    small_items_threshold,
)

# RNG key prefixes: 0/1 greedy (see relaxation), 2 rounding trials, 3 diagnostics
_TRIAL_KEY = 2
_CHECK_KEY = 3
FACTOR_380 = math.log(380)


@dataclass
class PipelineConfig:
    greedy: GreedyConfig = field(default_factory=GreedyConfig)
    c: float = 1.0
    trials: int = 16
    seed: int = 0
    d: float | None = None  # recombination parameter, defaults to c + 2
    assign_leftovers: bool = False

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.d is not None and not self.d >= 2:
            raise ValueError("d must be at least 2")

    @property
    def d_value(self) -> float:
        return self.c + 2 if self.d is None else self.d

    def to_dict(self) -> dict:
        return {
            "greedy": self.greedy.to_dict(),
            "c": self.c,
            "trials": self.trials,
            "seed": self.seed,
            "d": self.d_value,
            "assign_leftovers": self.assign_leftovers,
        }


def jsonable(obj):
    """Convert numpy scalars/arrays, sets and non-finite floats for ``json.dumps``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(jsonable(v) for v in obj)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n"


def strip_timing(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timing"}


def _instance_meta(instance: Instance) -> dict:
    return {
        "n": instance.n,
        "m": instance.m,
        "families": [o.family for o in instance.oracles],
        "metadata": instance.metadata,
    }


def assign_leftovers(instance: Instance, allocation: list, items: Sequence[int]) -> tuple[list, dict]:
    """Give each item, in index order, to the agent with the largest log gain.

    Ties (including all-zero gains) go to the lowest agent index.  Returns the
    new allocation and ``{item: agent}``.
    """
    alloc = [set(b) for b in allocation]
    given = {}
    for j in sorted(items):
        best_gain, best_agent = None, 0
        for i, o in enumerate(instance.oracles):
            before, after = o.value(alloc[i]), o.value(alloc[i] | {j})
            if after <= 0:
                gain = 0.0
            elif before <= 0:
                gain = math.inf
            else:
                gain = math.log(after) - math.log(before)
            if best_gain is None or gain > best_gain + 1e-12:
                best_gain, best_agent = gain, i
        alloc[best_agent].add(j)
        given[j] = best_agent
    return [frozenset(b) for b in alloc], given


def run_pipeline(instance: Instance, config: PipelineConfig | None = None) -> dict:
    """Solve one instance and return the run report.

    Any :class:`NSWError` raised along the way carries the report built so far
    in its ``partial`` attribute.
    """
    config = config or PipelineConfig()
    t0 = time.perf_counter()
    report: dict = {
        "instance_meta": _instance_meta(instance),
        "config": config.to_dict(),
        "notes": [],
    }
    try:
        _run(instance, config, report)
    except NSWError as exc:
        report["timing"] = {"seconds": time.perf_counter() - t0}
        if getattr(exc, "partial", None) is not None:
            report["partial_trace"] = exc.partial.to_dict() if hasattr(exc.partial, "to_dict") else exc.partial
        exc.partial = report
        raise
    report["timing"] = {"seconds": time.perf_counter() - t0}
    return report


def _run(instance: Instance, config: PipelineConfig, report: dict) -> None:
    n, m = instance.n, instance.m
    tau, H, opt_zero = initial_matching(instance)
    report.update(tau=list(tau), H=sorted(H), opt_zero=opt_zero)
    if opt_zero:
        report["notes"].append(
            "fewer than n agents can be matched at positive value; every allocation has NSW 0; "
            "returning the initial matching")
        alloc = [frozenset() if t is None else frozenset({t}) for t in tau]
        report.update(A_prime=[], greedy_trace=None, trials=[])
        _finish(instance, config, report, alloc, None)
        return
    A = active_agents(instance, H)
    G = complement_items(instance, H)
    report["A_prime"] = A
    y, trace = iterated_continuous_greedy(instance, A, G, config.greedy, seed=config.seed)
    report["greedy_trace"] = dict(trace.to_dict(), y=y.tolist())
    trials = []
    for t in range(config.trials):
        outcome = randomized_rounding(y, stream(config.seed, _TRIAL_KEY, t))
        R = outcome.bundles
        sigma = final_matching(instance, R, H)
        alloc = [R[i] | ({sigma[i]} if sigma[i] is not None else set()) for i in range(n)]
        trials.append({
            "index": t,
            "Z": outcome.Z.tolist(),
            "R": [sorted(b) for b in R],
            "sigma": list(sigma),
            "log_nsw": nsw_value(instance, alloc, allow_unassigned=True),
            "_alloc": alloc,
        })
    best = 0
    for t in range(1, len(trials)):
        # tolerance keeps exact ties (up to rounding) on the lowest index, so rescaling cannot flip them
        if trials[t]["log_nsw"] > trials[best]["log_nsw"] + LOG_TIE_TOL:
            best = t
    alloc = trials[best]["_alloc"]
    for tr in trials:
        del tr["_alloc"]
    report["trials"] = trials
    _finish(instance, config, report, alloc, best)


def _finish(instance: Instance, config: PipelineConfig, report: dict, alloc: list, best_trial) -> None:
    used = set().union(*alloc) if alloc else set()
    discarded = [j for j in range(instance.m) if j not in used]
    given = {}
    if config.assign_leftovers and discarded:
        alloc, given = assign_leftovers(instance, alloc, discarded)
        discarded = []
    report["best"] = {
        "trial": best_trial,
        "allocation": [sorted(b) for b in alloc],
        "log_nsw": nsw_value(instance, alloc, allow_unassigned=True),
        "discarded": discarded,
        "leftovers_assigned": {str(j): a for j, a in given.items()},
    }


def best_allocation(report: dict) -> list[frozenset]:
    return [frozenset(b) for b in report["best"]["allocation"]]


def greedy_certificate(instance: Instance, report: dict, exact) -> dict:
    """Ratio ``(1/n) sum_{A'} V_i(y*_i) / V_i(y_i)`` against the integral optimum on ``G'``."""
    A = report["A_prime"]
    G = complement_items(instance, report["H"])
    y = np.asarray(report["greedy_trace"]["y"], dtype=float)
    y_star = optimum_fractional(instance, exact, A, G)
    ratio = ratio_certificate(instance, A, y, y_star)
    iters = report["greedy_trace"]["iterations"]
    return {
        "ratio": ratio,
        "bound": math.e,
        "ok": ratio <= math.e + 1e-6,
        "iterations": iters,
        "iteration_bound": iteration_bound(instance.n),
        "iterations_ok": iters <= iteration_bound(instance.n),
    }


def compare_command(instance: Instance, config: PipelineConfig | None = None, limit: int = BRUTE_FORCE_LIMIT) -> dict:
    """Run the solver and the brute-force optimum; add ratio and certificates."""
    report = run_pipeline(instance, config)
    try:
        exact = brute_force_nsw(instance, limit)
    except SizeLimitExceeded as exc:
        report["exact"] = {"available": False, "reason": str(exc)}
        return report
    alg = report["best"]["log_nsw"]
    opt = exact.log_nsw
    if opt == NEG_INF:
        ratio, ok = None, True
        report["notes"].append("OPT = 0; ratio undefined")
    else:
        ratio = math.exp(alg - opt) if alg > NEG_INF else 0.0
        ok = alg >= opt - FACTOR_380 - 1e-12
    report["exact"] = {
        "available": True,
        "opt_log_nsw": opt,
        "opt_allocation": [sorted(b) for b in exact.bundles],
        "alg_log_nsw": alg,
        "ratio": ratio,
        "ratio_ok_380": ok,
        "enumerated": exact.enumerated,
    }
    if not report["opt_zero"]:
        report["certificates"] = {"greedy": greedy_certificate(instance, report, exact)}
    return report


def check_command(instance: Instance, config: PipelineConfig | None = None, limit: int = BRUTE_FORCE_LIMIT) -> dict:
    """Solver run plus the rounding and rematching diagnostics.

    ``certificates["ok"]`` aggregates every check that must hold on every run;
    the small-items event is reported but not gated since it only holds with
    constant probability.
    """
    config = config or PipelineConfig()
    report = compare_command(instance, config, limit)
    certs = report.setdefault("certificates", {})
    if report["opt_zero"]:
        certs["ok"] = True
        report["notes"].append("diagnostics skipped: initial matching is not perfect")
        return report
    n = instance.n
    A = report["A_prime"]
    H = report["H"]
    G = complement_items(instance, H)
    y = np.asarray(report["greedy_trace"]["y"], dtype=float)
    c, d = config.c, config.d_value
    tau = Matching(tuple(report["tau"]))
    oks = []

    # large/small item split on the padded solution
    padded, y_pad = pad_with_dummies(instance, y, c, A)
    items = G + list(range(instance.m, padded.m))
    outcome = randomized_rounding(y_pad, stream(config.seed, _CHECK_KEY, 0))
    sparse = restricted_randomized_rounding(padded, y_pad, c, agents=A, items=items, outcome=outcome)
    R = outcome.restricted_to(instance.m).bundles
    large = {}
    for i in A:
        post = large_set_postconditions(padded.oracles[i], y_pad[i], sparse.large_sets[i], c, items)
        post["L"] = sparse.large_sets[i]
        post["S"] = sorted(sparse.small_sets[i])
        post["S_in_R"] = sparse.small_sets[i] & set(range(instance.m)) <= R[i]
        large[str(i)] = post
        oks += [post["mass_ok"], post["marginal_ok"], post["S_in_R"]]
    certs["large_sets"] = large

    # recombination against the best trial's matching, with y = its rounded bundles
    best = report["trials"][report["best"]["trial"]]
    pi = Matching(tuple(best["sigma"]))
    y_R = np.zeros((n, instance.m))
    for i, b in enumerate(best["R"]):
        y_R[i, list(b)] = 1.0
    recomb = {}
    for label, yy in (("rounded", y_R), ("fractional", y)):
        rho, dec = recombine(instance, tau, pi, yy, d)
        ver = verify_recombination(instance, tau, pi, rho, yy, d)
        ident = recombination_identities(instance, pi, rho, yy, dec)
        recomb[label] = {"rho": list(rho), "decomposition": dec.to_dict(), "verify": ver, "identities": ident}
        oks += [ver["ok"], ident["pi_prime_bound_ok"]]
    certs["recombination"] = recomb

    exact_info = report.get("exact", {})
    if exact_info.get("available"):
        exact = brute_force_nsw(instance, limit)
        y_star = optimum_fractional(padded, exact, A, items)
        small_ratio = ratio_certificate(padded, A, sparse.y_sparse, y_star)
        certs["small_items"] = {
            "ratio": small_ratio,
            "threshold": small_items_threshold(c),
            "event": small_ratio <= small_items_threshold(c),
        }
        ext = matching_extension_bound(padded, sparse.y_sparse, H, exact, A)
        certs["matching_extension"] = ext
        oks += [ext["ok"], certs["greedy"]["ok"], certs["greedy"]["iterations_ok"], exact_info["ratio_ok_380"]]
    else:
        report["notes"].append("matching-extension bound needs the brute-force optimum; skipped")
    certs["ok"] = bool(all(oks))
    return report


def allocation_is_valid(instance: Instance, report: dict) -> list[str]:
    """Structural checks on a report; returns a list of problems (empty when valid)."""
    problems = []
    alloc = best_allocation(report)
    if len(alloc) != instance.n:
        problems.append("allocation length differs from n")
    seen: set = set()
    for i, b in enumerate(alloc):
        if b & seen:
            problems.append(f"bundle {i} overlaps earlier bundles")
        seen |= b
        if any(not 0 <= j < instance.m for j in b):
            problems.append(f"bundle {i} has items outside the ground set")
    if not set(report["H"]) <= seen:
        problems.append("some H item is unassigned")
    if seen | set(report["best"]["discarded"]) != set(range(instance.m)):
        problems.append("assigned plus discarded items do not cover the ground set")
    if report["trials"]:
        best = max(t["log_nsw"] for t in report["trials"])
        if report["best"]["log_nsw"] < best - LOG_TIE_TOL and not report["config"]["assign_leftovers"]:
            problems.append("best log_nsw is below the best trial")
    return problems
