"""Independent randomized rounding, plus the large/small item machinery used
to analyse it (FindLargeSet, dummy padding, restricted rounding).

Only :func:`randomized_rounding` is part of the solver.  The rest produces
diagnostic objects; in particular the sparsified solution of
:func:`restricted_randomized_rounding` need not be a feasible allocation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import multilinear as ml
from .instance import Instance

UNASSIGNED = -1
_TOL = ml.FEASIBILITY_TOL


@dataclass
class RoundingOutcome:
    """``Z[j]`` is the agent receiving item ``j`` (``-1`` when the item is dropped)."""

    Z: np.ndarray
    n: int

    @property
    def bundles(self) -> list[frozenset]:
        out = [set() for _ in range(self.n)]
        for j, a in enumerate(self.Z):
            if a != UNASSIGNED:
                out[int(a)].add(j)
        return [frozenset(b) for b in out]

    def restricted_to(self, m: int) -> "RoundingOutcome":
        return RoundingOutcome(self.Z[:m].copy(), self.n)


def randomized_rounding(y: np.ndarray, rng: np.random.Generator) -> RoundingOutcome:
    """Give item ``j`` to agent ``i`` with probability ``y[i, j]``, independently across items."""
    y = np.asarray(y, dtype=float)
    ml.check_feasible(y)
    n, m = y.shape
    u = rng.random(m)
    cum = np.cumsum(y, axis=0)
    Z = (u[None, :] >= cum).sum(axis=0)
    Z = np.where(Z >= n, UNASSIGNED, Z).astype(np.int64)
    return RoundingOutcome(Z, n)


def pad_with_dummies(instance: Instance, y: np.ndarray, c: float, agents: Sequence[int] | None = None):
    """Append ``ceil(c) * n`` zero-valued items so every listed agent holds mass at least ``c``.

    Each agent's deficit is spread uniformly over the new columns; original
    coordinates are unchanged.  Returns ``(padded_instance, padded_y)``.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    y = np.asarray(y, dtype=float)
    n = instance.n
    agents = range(n) if agents is None else agents
    k = math.ceil(c) * n
    deficit = np.zeros(n)
    for i in agents:
        deficit[i] = max(0.0, c - float(y[i].sum()))
    pad = np.repeat((deficit / k)[:, None], k, axis=1)
    padded = Instance(n, instance.m + k, tuple(o.with_dummies(k) for o in instance.oracles),
                      instance.labels, dict(instance.metadata, dummies=k))
    return padded, np.hstack([y, pad])


def find_large_set(instance: Instance, i: int, y_i: np.ndarray, c: float,
                   items: Sequence[int] | None = None) -> list[int]:
    """Greedy prefix of ``items`` by marginal value ``V(y^(L) + 1_j) - V(y^(L))``.

    Stops once the fractional mass of the chosen items reaches ``c`` (or the
    items run out).  Ties go to the lowest item index.  ``items`` defaults to
    the whole ground set.  Returns the items in the order they were added.
    """
    oracle = instance.oracles[i]
    y_i = np.asarray(y_i, dtype=float)
    items = sorted(int(j) for j in (range(instance.m) if items is None else items))
    if float(y_i[items].sum()) < c - _TOL:
        raise ValueError(
            f"agent holds mass {y_i[items].sum():.6g} < c = {c}; call pad_with_dummies first"
        )
    L: list[int] = []
    rest = list(items)
    mass = 0.0
    while rest:
        # y^(L) is 0 off L, so the gradient there is exactly the marginal of adding j
        grad = ml.gradient(oracle, ml.restrict(y_i, L))
        marg = grad[rest]
        best = marg.max()
        pick = rest[int(np.flatnonzero(marg >= best - 1e-12 * max(abs(best), 1e-300))[0])]
        L.append(pick)
        rest.remove(pick)
        mass += float(y_i[pick])
        if mass >= c - _TOL:
            break
    return L


def large_set_postconditions(oracle, y_i: np.ndarray, L: Sequence[int], c: float, items: Sequence[int]) -> dict:
    """Mass window ``c <= mass <= c + 1`` and the bound ``marginal <= V(y^(L)) / c`` off ``L``."""
    y_i = np.asarray(y_i, dtype=float)
    mass = float(y_i[list(L)].sum())
    base_vec = ml.restrict(y_i, L)
    base = ml.eval_exact(oracle, base_vec)
    grad = ml.gradient(oracle, base_vec)
    outside = [j for j in items if j not in set(L)]
    worst = float(max((grad[j] for j in outside), default=0.0))
    bound = base / c
    return {
        "mass": mass,
        "mass_ok": c - _TOL <= mass <= c + 1 + _TOL,
        "value": base,
        "max_outside_marginal": worst,
        "marginal_bound": bound,
        "marginal_ok": worst <= bound + 1e-9,
    }


@dataclass
class SparsifiedSolution:
    large_sets: dict  # agent -> list of large items L_i
    small_sets: dict  # agent -> frozenset S_i
    y_sparse: np.ndarray
    outcome: RoundingOutcome


def restricted_randomized_rounding(
    instance: Instance,
    y: np.ndarray,
    c: float,
    rng: np.random.Generator | None = None,
    agents: Sequence[int] | None = None,
    items: Sequence[int] | None = None,
    outcome: RoundingOutcome | None = None,
) -> SparsifiedSolution:
    """Round only the small items; large items stay fractional.

    ``y`` must already be padded (every agent in ``agents`` holds mass >= c
    over ``items``).  Pass ``outcome`` to reuse a draw of ``Z``; otherwise one
    is drawn from ``rng``.
    """
    y = np.asarray(y, dtype=float)
    n, m = y.shape
    agents = list(range(n)) if agents is None else list(agents)
    items = list(range(m)) if items is None else sorted(items)
    if outcome is None:
        if rng is None:
            raise ValueError("need rng or outcome")
        outcome = randomized_rounding(y, rng)
    large, small = {}, {}
    y_s = np.zeros_like(y)
    item_set = set(items)
    for i in agents:
        L = find_large_set(instance, i, y[i], c, items)
        Lset = set(L)
        S = frozenset(j for j in item_set - Lset if outcome.Z[j] == i)
        large[i] = L
        small[i] = S
        y_s[i] = ml.overlay(ml.restrict(y[i], L), S)
    return SparsifiedSolution(large, small, y_s, outcome)


def small_items_threshold(c: float) -> float:
    """Right-hand side ``3 (2 + 4/c)`` of the small-items event (``eps = 3/e - 1`` with ``alpha = e``)."""
    return 3 * (2 + 4 / c)


def small_items_min_rate() -> float:
    """Conservative success-rate floor ``eps / 4`` with ``eps = 3/e - 1``."""
    return (3 / math.e - 1) / 4
