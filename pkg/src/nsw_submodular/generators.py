"""Seeded instance generators."""
from __future__ import annotations

import numpy as np

from .errors import InstanceFormatError
from .instance import Instance
from .valuations import (
    AdditiveOracle,
    BudgetAdditiveOracle,
    CoverageOracle,
    PartitionMatroidRankOracle,
)

GENERATORS = ("additive", "coverage", "budget_additive", "partition_matroid_rank", "tightness")


def _round(x, digits=3):
    return np.round(np.asarray(x, dtype=float), digits)


def _additive(rng, m, low=0.0, high=1.0):
    return AdditiveOracle(_round(rng.uniform(low, high, m)))


def _coverage(rng, m, density=0.3, universe=None):
    u = int(universe) if universe is not None else 2 * m
    weights = _round(rng.uniform(0.5, 1.5, u))
    inc = rng.random((m, u)) < density
    return CoverageOracle(weights, [np.flatnonzero(row).tolist() for row in inc])


def _budget_additive(rng, m, low=0.0, high=1.0):
    w = _round(rng.uniform(low, high, m))
    budget = float(_round(rng.uniform(0.3, 0.8) * w.sum()))
    return BudgetAdditiveOracle(w, budget)


def _partition_rank(rng, m):
    n_blocks = int(rng.integers(1, max(1, m // 2) + 1))
    block_of = rng.integers(0, n_blocks, m)
    blocks = [np.flatnonzero(block_of == b).tolist() for b in range(n_blocks)]
    caps = [int(rng.integers(1, len(b) + 1)) if b else 1 for b in blocks]
    return PartitionMatroidRankOracle(blocks, caps, m)


def tightness_instance(n: int = 3) -> Instance:
    """``n/3`` agents value ``|S & H|``, the rest ``min(|S|, 1)``; ``H`` is items ``0..n-1``.

    Items ``n..2n-1`` form ``G - H``.  The optimum gives each H-valuing agent
    three H-items, for NSW ``3**(1/3)``; allocating ``H`` as a matching caps
    the NSW at 1.
    """
    if n < 3 or n % 3:
        raise InstanceFormatError("tightness generator needs n divisible by 3")
    m = 2 * n
    H = list(range(n))
    oracles = [PartitionMatroidRankOracle([H], [n], m) for _ in range(n // 3)]
    oracles += [PartitionMatroidRankOracle([list(range(m))], [1], m) for _ in range(n - n // 3)]
    return Instance(
        n, m, tuple(oracles),
        labels={"agents": [f"h{i}" for i in range(n // 3)] + [f"u{i}" for i in range(n - n // 3)],
                "items": [f"H{j}" for j in H] + [f"G{j}" for j in range(n, m)]},
        metadata={"generator": "tightness", "seed": None, "params": {"n": n}},
    )


def generate_instance(family: str, n: int, m: int | None = None, seed: int = 0, **params) -> Instance:
    """Random instance with ``n`` agents of one valuation family.

    ``params`` are forwarded to the family generator (``density`` and
    ``universe`` for coverage; ``low``/``high`` weight range for additive and
    budget-additive).  ``family="tightness"`` ignores ``seed`` and ``m``.
    """
    if family == "tightness":
        if m is not None and m != 2 * n:
            raise InstanceFormatError("tightness instance has m = 2n")
        return tightness_instance(n)
    if n < 1 or m is None or m < 0:
        raise InstanceFormatError("need n >= 1 and m >= 0")
    makers = {
        "additive": _additive,
        "coverage": _coverage,
        "budget_additive": _budget_additive,
        "partition_matroid_rank": _partition_rank,
    }
    if family not in makers:
        raise InstanceFormatError(f"unknown generator {family!r}; expected one of {GENERATORS}")
    rng = np.random.default_rng(seed)
    try:
        oracles = tuple(makers[family](rng, m, **params) for _ in range(n))
    except TypeError as exc:
        raise InstanceFormatError(f"bad parameters for {family}: {exc}") from exc
    meta = {"generator": family, "seed": int(seed), "params": {k: params[k] for k in sorted(params)}}
    return Instance(n, m, oracles, metadata=meta)
