"""Maximum-product bipartite matchings between agents and items.

The objective is lexicographic: first the number of agents matched at a
strictly positive weight, then the sum of log-weights over those agents.
Zero-weight edges are never used.  Among optimal matchings the one with the
lexicographically smallest assignment vector is returned (agent 0 first,
lower item index preferred, "unmatched" ranked after every item).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

# absolute tolerance on log-sums when deciding that two matchings tie
LOG_TIE_TOL = 1e-9


@dataclass(frozen=True)
class Matching:
    """Injective partial map from agents ``0..n-1`` to items; ``None`` means unmatched."""

    assignment: tuple

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(None if a is None else int(a) for a in self.assignment))
        used = [a for a in self.assignment if a is not None]
        if len(used) != len(set(used)):
            raise ValueError(f"matching is not injective: {self.assignment}")

    def __getitem__(self, agent: int):
        return self.assignment[agent]

    def __len__(self) -> int:
        return len(self.assignment)

    def __iter__(self):
        return iter(self.assignment)

    @property
    def items(self) -> frozenset:
        return frozenset(a for a in self.assignment if a is not None)

    @property
    def matched_count(self) -> int:
        return sum(a is not None for a in self.assignment)

    def to_list(self) -> list:
        return list(self.assignment)


def _scores(weights: np.ndarray) -> np.ndarray:
    """Positive scores such that a larger total means lexicographically better."""
    pos = weights > 0
    scores = np.zeros(weights.shape)
    if not pos.any():
        return scores
    logs = np.log(weights[pos])
    lo = logs.min()
    span = logs.max() - lo
    big = (span + 1.0) * (min(weights.shape) + 1)
    scores[pos] = big + (logs - lo)
    return scores


def _best_total(scores: np.ndarray, rows: Sequence[int], cols: Sequence[int]) -> float:
    if len(rows) == 0 or len(cols) == 0:
        return 0.0
    sub = scores[np.ix_(rows, cols)]
    r, c = linear_sum_assignment(sub, maximize=True)
    return float(sub[r, c].sum())


def max_product_matching(weights) -> Matching:
    """Matching maximizing the product of matched weights (see module docstring).

    ``weights`` is an ``(n, k)`` array of non-negative finite values.
    """
    W = np.asarray(weights, dtype=float)
    if W.ndim != 2:
        raise ValueError("weights must be a 2-d array")
    if np.any(~np.isfinite(W)) or np.any(W < 0):
        raise ValueError("weights must be finite and non-negative")
    n, k = W.shape
    if n == 0:
        return Matching(())
    scores = _scores(W)
    # the count part of the objective is scaled by big, so the tolerance only
    # ever has to separate log-sum ties
    remaining = _best_total(scores, range(n), range(k))
    free_cols = list(range(k))
    assignment: list = [None] * n
    for a in range(n):
        rest = list(range(a + 1, n))
        for j in free_cols:
            if scores[a, j] <= 0:
                continue
            cols = [c for c in free_cols if c != j]
            total = scores[a, j] + _best_total(scores, rest, cols)
            if total >= remaining - LOG_TIE_TOL:
                assignment[a] = j
                remaining -= scores[a, j]
                free_cols = cols
                break
    return Matching(tuple(assignment))


def matching_log_value(weights, matching: Matching) -> float:
    """Sum of log-weights over matched agents (``-inf`` if some matched weight is 0)."""
    W = np.asarray(weights, dtype=float)
    total = 0.0
    for a, j in enumerate(matching):
        if j is None:
            continue
        if W[a, j] <= 0:
            return float("-inf")
        total += float(np.log(W[a, j]))
    return total


def singleton_matrix(instance) -> np.ndarray:
    """``(n, m)`` matrix of singleton values ``v_i({j})``."""
    if instance.m == 0:
        return np.zeros((instance.n, 0))
    return np.stack([o.singleton_values() for o in instance.oracles])


def initial_matching(instance) -> tuple[Matching, frozenset, bool]:
    """Phase I: ``(tau, H, opt_zero)``.

    ``opt_zero`` is set when fewer than ``n`` agents can be matched at a
    positive value, in which case every allocation has NSW 0.
    """
    tau = max_product_matching(singleton_matrix(instance))
    return tau, tau.items, tau.matched_count < instance.n


def final_matching(instance, bundles: Sequence, H) -> Matching:
    """Matching ``sigma`` into ``H`` maximizing ``prod_i v_i(R_i + sigma(i))``.

    H-items left over after the lexicographic optimum go one per unmatched
    agent, lowest agent and item index first, so that ``sigma`` is perfect
    whenever ``|H| = n``.
    """
    H = sorted(H)
    n = instance.n
    if not H:
        return Matching((None,) * n)
    W = np.zeros((n, len(H)))
    for i, oracle in enumerate(instance.oracles):
        base = np.zeros(oracle.ground_size, dtype=bool)
        base[list(bundles[i])] = True
        X = np.broadcast_to(base, (len(H), oracle.ground_size)).copy()
        X[np.arange(len(H)), H] = True
        W[i] = oracle.batch_value(X)
    local = max_product_matching(W)
    assignment = [None if c is None else H[c] for c in local]
    leftover = [h for h in H if h not in set(assignment)]
    for a in range(n):
        if assignment[a] is None and leftover:
            assignment[a] = leftover.pop(0)
    return Matching(tuple(assignment))
