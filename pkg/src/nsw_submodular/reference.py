"""Exhaustive NSW oracles and the golden instance corpus."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import SizeLimitExceeded
from .generators import generate_instance, tightness_instance
from .instance import Instance
from .matching import initial_matching
from .valuations import AdditiveOracle, ValuationOracle

BRUTE_FORCE_LIMIT = 10**7
_CHUNK = 1 << 16
NEG_INF = float("-inf")


@dataclass
class ExactResult:
    assignment: tuple  # agent index per item
    log_nsw: float
    enumerated: int
    n: int

    @property
    def nsw(self) -> float:
        return math.exp(self.log_nsw) if self.log_nsw > NEG_INF else 0.0

    @property
    def bundles(self) -> list[frozenset]:
        return bundles_from_assignment(self.assignment, self.n)

    def to_dict(self) -> dict:
        return {
            "assignment": list(self.assignment),
            "bundles": [sorted(b) for b in self.bundles],
            "log_nsw": self.log_nsw,
            "nsw": self.nsw,
            "enumerated": self.enumerated,
        }


def bundles_from_assignment(assignment: Sequence, n: int) -> list[frozenset]:
    out = [set() for _ in range(n)]
    for j, a in enumerate(assignment):
        if a is not None and a >= 0:
            out[a].add(j)
    return [frozenset(b) for b in out]


def log_nsw_from_values(values: Iterable[float]) -> float:
    """``(1/n) sum ln v_i``, ``-inf`` when any value is 0."""
    vals = list(values)
    if not vals:
        return 0.0
    if min(vals) <= 0:
        return NEG_INF
    return math.fsum(math.log(v) for v in vals) / len(vals)


def nsw_value(instance: Instance, allocation: Sequence[Iterable[int]], allow_unassigned: bool = False) -> float:
    """Log-domain NSW of an allocation given as one item set per agent."""
    if len(allocation) != instance.n:
        raise ValueError(f"allocation has {len(allocation)} bundles for {instance.n} agents")
    seen: set = set()
    for i, bundle in enumerate(allocation):
        b = set(bundle)
        if b & seen:
            raise ValueError(f"bundle {i} overlaps an earlier bundle on items {sorted(b & seen)}")
        seen |= b
    if not allow_unassigned and seen != set(range(instance.m)):
        raise ValueError(f"items {sorted(set(range(instance.m)) - seen)} are unassigned")
    return log_nsw_from_values(o.value(b) for o, b in zip(instance.oracles, allocation))


def _log_table(oracle: ValuationOracle) -> np.ndarray:
    m = oracle.ground_size
    parts = []
    step = max(1, _CHUNK)
    for start in range(0, 1 << m, step):
        codes = np.arange(start, min(1 << m, start + step), dtype=np.int64)
        X = ((codes[:, None] >> np.arange(m, dtype=np.int64)) & 1).astype(bool)
        parts.append(oracle.batch_value(X))
    t = np.concatenate(parts) if parts else np.zeros(1)
    with np.errstate(divide="ignore"):
        return np.where(t > 0, np.log(np.where(t > 0, t, 1.0)), NEG_INF)


def _search(instance: Instance, limit: int, H: Sequence[int] | None = None) -> ExactResult:
    n, m = instance.n, instance.m
    total = n**m
    if total > limit:
        raise SizeLimitExceeded(f"n^m = {n}^{m} = {total} exceeds the brute-force limit {limit}")
    logt = [_log_table(o) for o in instance.oracles]
    powers = (1 << np.arange(m, dtype=np.int64))
    place = n ** np.arange(m - 1, -1, -1, dtype=np.int64)  # item 0 is the most significant digit
    H = None if H is None else np.asarray(sorted(H), dtype=np.int64)
    best_val, best_code, counted = NEG_INF, None, 0
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        digits = (codes[:, None] // place) % n if m else np.zeros((codes.size, 0), dtype=np.int64)
        ok = np.ones(codes.size, dtype=bool)
        if H is not None:
            hd = digits[:, H]
            for i in range(n):
                ok &= (hd == i).sum(axis=1) == 1
        scores = np.zeros(codes.size)
        for i in range(n):
            masks = ((digits == i) * powers).sum(axis=1) if m else np.zeros(codes.size, dtype=np.int64)
            scores += logt[i][masks]
        scores = np.where(ok, scores, np.nan)
        counted += int(ok.sum())
        if not ok.any():
            continue
        local = float(np.nanmax(scores))
        tol = 1e-12 * max(1.0, abs(local)) if np.isfinite(local) else 0.0
        if best_code is None or local > best_val + tol:
            # -inf scores compare >= -inf, so an all-zero chunk yields its first feasible code
            best_val = local
            best_code = int(codes[np.flatnonzero(ok & (scores >= local - tol))[0]])
    if best_code is None:
        raise ValueError("no feasible assignment")
    assignment = tuple(int(d) for d in ((best_code // place) % n)) if m else ()
    # recompute from oracles so log_nsw matches nsw_value exactly
    bundles = bundles_from_assignment(assignment, n)
    log_nsw = log_nsw_from_values(o.value(b) for o, b in zip(instance.oracles, bundles))
    return ExactResult(assignment, log_nsw, counted, n)


def brute_force_nsw(instance: Instance, limit: int = BRUTE_FORCE_LIMIT) -> ExactResult:
    """Exact NSW optimum by enumerating all ``n**m`` assignments.

    Ties go to the lexicographically smallest assignment vector.
    """
    return _search(instance, limit)


def brute_force_nsw_matched(instance: Instance, H: Iterable[int], limit: int = BRUTE_FORCE_LIMIT) -> ExactResult:
    """Best integral allocation in which ``H`` (``|H| = n``) is distributed as a perfect matching."""
    H = sorted(set(H))
    if len(H) != instance.n:
        raise ValueError(f"|H| = {len(H)} must equal n = {instance.n}")
    return _search(instance, limit, H)


def optimum_fractional(instance: Instance, result: ExactResult, agents: Iterable[int], items: Iterable[int]) -> np.ndarray:
    """Indicator matrix of an integral allocation restricted to ``agents x items``."""
    y = np.zeros((instance.n, instance.m))
    items = set(items)
    for i in agents:
        for j in result.bundles[i]:
            if j in items:
                y[i, j] = 1.0
    return y


# -- golden corpus -------------------------------------------------------------

GOLDEN_FAMILIES = ("additive", "coverage", "budget_additive", "partition_matroid_rank")
GOLDEN_N = (2, 3)
GOLDEN_M = tuple(range(3, 9))
GOLDEN_SEEDS = tuple(range(5))


@dataclass
class GoldenCase:
    name: str
    instance: Instance
    exact: ExactResult
    notes: str = ""
    tags: set = field(default_factory=set)


def _golden_seed(family_idx: int, n: int, m: int, s: int) -> int:
    return 10_000 * family_idx + 1_000 * n + 100 * m + s


def golden_specs() -> list[tuple[str, Instance, str, set]]:
    """The corpus instances without their exact results (cheap)."""
    specs = [("tightness-n3", tightness_instance(3), "OPT = 3^(1/3), matched optimum 1", {"tightness"})]
    for f, fam in enumerate(GOLDEN_FAMILIES):
        for n in GOLDEN_N:
            for m in GOLDEN_M:
                for s in GOLDEN_SEEDS:
                    seed = _golden_seed(f, n, m, s)
                    inst = generate_instance(fam, n, m, seed)
                    specs.append((f"{fam}-n{n}-m{m}-s{seed}", inst, "seeded random", {"random", fam}))
    specs += [
        ("diag-2x2", Instance(2, 2, (AdditiveOracle([2, 0]), AdditiveOracle([0, 3]))),
         "only one positive matching; OPT = sqrt(6)", {"degenerate"}),
        ("zero-agent", Instance(2, 3, (AdditiveOracle([1, 2, 3]), AdditiveOracle([0, 0, 0]))),
         "agent 1 values nothing; OPT = 0", {"degenerate", "opt_zero"}),
        ("m-less-than-n", generate_instance("additive", 3, 2, seed=7),
         "fewer items than agents; OPT = 0", {"degenerate", "opt_zero"}),
        ("single-agent", generate_instance("coverage", 1, 5, seed=11, density=0.5),
         "one agent takes everything", {"degenerate", "single"}),
        ("coverage-empty", generate_instance("coverage", 2, 4, seed=3, density=0.0),
         "all valuations zero; OPT = 0", {"degenerate", "opt_zero"}),
    ]
    return specs


@functools.lru_cache(maxsize=1)
def golden_instances() -> tuple[GoldenCase, ...]:
    """Corpus of brute-forceable instances paired with their exact optima."""
    cases = []
    for name, inst, notes, tags in golden_specs():
        cases.append(GoldenCase(name, inst, brute_force_nsw(inst), notes, set(tags)))
    return tuple(cases)


def matched_optimum(instance: Instance) -> ExactResult | None:
    """Matched brute force with ``H`` from the initial matching, or None when it is not perfect."""
    tau, H, opt_zero = initial_matching(instance)
    if opt_zero:
        return None
    return brute_force_nsw_matched(instance, H)
