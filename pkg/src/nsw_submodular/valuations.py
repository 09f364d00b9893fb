"""Value oracles for monotone submodular valuations.

Every oracle answers value queries ``v(S)`` for item sets ``S`` over a ground
set ``{0, ..., m-1}``.  The workhorse method is :meth:`ValuationOracle.batch_value`,
which evaluates many sets at once given as rows of a boolean matrix; the
enumeration, sampling and brute-force code all go through it.

Families
--------
additive
    ``v(S) = sum_{j in S} w_j``
coverage
    ``v(S) = sum of weights of universe elements covered by S``
budget_additive
    ``v(S) = min(sum_{j in S} w_j, B)``
partition_matroid_rank
    ``v(S) = sum_b min(|S & block_b|, cap_b)``
explicit_table
    ``v`` stored as an array of length ``2**m`` indexed by subset bitmask

Oracles are immutable after construction.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InstanceFormatError, PropertyViolation

FAMILIES = (
    "additive",
    "coverage",
    "budget_additive",
    "partition_matroid_rank",
    "explicit_table",
)

# exhaustive property checks are only attempted up to this ground-set size
EXHAUSTIVE_LIMIT = 12
# largest ground set for which a full 2**m table is materialized
TABLE_LIMIT = 24


def as_mask(S: Iterable[int], m: int) -> np.ndarray:
    """Boolean indicator of the item set ``S`` over ``m`` items."""
    mask = np.zeros(m, dtype=bool)
    for j in S:
        j = int(j)
        if not 0 <= j < m:
            raise IndexError(f"item {j} out of range for ground set of size {m}")
        mask[j] = True
    return mask


def subset_matrix(m: int) -> np.ndarray:
    """All ``2**m`` subsets as rows of a boolean matrix; row ``b`` has bit ``j`` of ``b`` in column ``j``."""
    if m > TABLE_LIMIT:
        raise ValueError(f"refusing to materialize 2**{m} subsets")
    codes = np.arange(1 << m, dtype=np.int64)
    return ((codes[:, None] >> np.arange(m, dtype=np.int64)) & 1).astype(bool)


def _as_weights(values, name: str) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError(f"{name}: expected a list of numbers") from exc
    if arr.ndim != 1:
        raise InstanceFormatError(f"{name}: expected a flat list")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InstanceFormatError(f"{name}: weights must be finite and non-negative")
    return arr


def _row_sums(X: np.ndarray, w: np.ndarray) -> np.ndarray:
    # row-wise sums are independent of the batch size (unlike BLAS matmul), keeping values bit-stable
    return np.where(X, w, 0.0).sum(axis=1)


class ValuationOracle:
    """Base class for value oracles.

    Subclasses implement :meth:`batch_value` and :meth:`params`.  They may
    override :meth:`batch_marginals`, :meth:`multilinear` and
    :meth:`multilinear_grad` with faster or closed-form versions.
    """

    family: str = "abstract"

    def __init__(self, ground_size: int, metadata: dict | None = None):
        if ground_size < 0:
            raise InstanceFormatError("ground_size must be non-negative")
        self._m = int(ground_size)
        self.metadata = dict(metadata or {})

    @property
    def ground_size(self) -> int:
        return self._m

    # -- queries -----------------------------------------------------------
    def batch_value(self, X: np.ndarray) -> np.ndarray:
        """Values of the sets given as rows of the boolean matrix ``X`` (shape ``(k, m)``)."""
        raise NotImplementedError

    def value(self, S: Iterable[int]) -> float:
        mask = as_mask(S, self._m)
        return float(self.batch_value(mask[None, :])[0])

    def marginal(self, S: Iterable[int], j: int) -> float:
        """``v(S + j) - v(S - j)``, regardless of whether ``j`` is in ``S``."""
        mask = as_mask(S, self._m)
        j = int(j)
        if not 0 <= j < self._m:
            raise IndexError(f"item {j} out of range for ground set of size {self._m}")
        X = np.stack([mask, mask])
        X[0, j] = True
        X[1, j] = False
        hi, lo = self.batch_value(X)
        return float(hi - lo)

    def batch_marginals(self, X: np.ndarray) -> np.ndarray:
        """Matrix of ``v(R + j) - v(R - j)`` for every row ``R`` of ``X`` and every item ``j``."""
        X = np.asarray(X, dtype=bool)
        k, m = X.shape
        if m == 0 or k == 0:
            return np.zeros((k, m))
        on = np.broadcast_to(X, (m, k, m)).copy()
        off = on.copy()
        idx = np.arange(m)
        on[idx, :, idx] = True
        off[idx, :, idx] = False
        vals = self.batch_value(np.concatenate([on, off]).reshape(2 * m * k, m))
        vals = vals.reshape(2, m, k)
        return (vals[0] - vals[1]).T

    def singleton_values(self) -> np.ndarray:
        return self.batch_value(np.eye(self._m, dtype=bool)) if self._m else np.zeros(0)

    def table(self) -> np.ndarray:
        """Values of all ``2**m`` subsets indexed by bitmask."""
        return self.batch_value(subset_matrix(self._m))

    # -- closed forms of the multilinear extension (None = not available) ---
    def multilinear(self, y: np.ndarray) -> float | None:
        return None

    def multilinear_grad(self, y: np.ndarray) -> np.ndarray | None:
        return None

    @property
    def has_closed_form(self) -> bool:
        return False

    # -- derived oracles ---------------------------------------------------
    def with_dummies(self, k: int) -> "ValuationOracle":
        """Same valuation on a ground set extended by ``k`` zero-valued items."""
        if k == 0:
            return self
        return PaddedOracle(self, k)

    def scaled(self, factor: float) -> "ValuationOracle":
        return ScaledOracle(self, factor)

    # -- serialization -----------------------------------------------------
    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params()}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(m={self._m})"

    def _check_X(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=bool)
        if X.ndim != 2 or X.shape[1] != self._m:
            raise ValueError(f"expected a (k, {self._m}) boolean matrix, got shape {X.shape}")
        return X


class AdditiveOracle(ValuationOracle):
    family = "additive"

    def __init__(self, weights: Sequence[float], metadata: dict | None = None):
        self.weights = _as_weights(weights, "weights")
        self.weights.setflags(write=False)
        super().__init__(len(self.weights), metadata)

    def batch_value(self, X):
        X = self._check_X(X)
        return _row_sums(X, self.weights)

    def batch_marginals(self, X):
        X = self._check_X(X)
        return np.broadcast_to(self.weights, X.shape).copy()

    def multilinear(self, y):
        return float(np.dot(self.weights, y))

    def multilinear_grad(self, y):
        return self.weights.copy()

    @property
    def has_closed_form(self):
        return True

    def params(self):
        return {"weights": self.weights.tolist()}


class CoverageOracle(ValuationOracle):
    """Weighted coverage: item ``j`` covers the universe elements ``covers[j]``."""

    family = "coverage"

    def __init__(
        self,
        universe_weights: Sequence[float],
        covers: Sequence[Sequence[int]],
        metadata: dict | None = None,
    ):
        self.universe_weights = _as_weights(universe_weights, "universe_weights")
        self.universe_weights.setflags(write=False)
        n_elems = len(self.universe_weights)
        inc = np.zeros((len(covers), n_elems), dtype=bool)
        for j, elems in enumerate(covers):
            for u in elems:
                u = int(u)
                if not 0 <= u < n_elems:
                    raise InstanceFormatError(
                        f"covers[{j}]: universe element {u} out of range (universe size {n_elems})"
                    )
                inc[j, u] = True
        self.incidence = inc
        self.incidence.setflags(write=False)
        self._inc_f = inc.astype(float)
        super().__init__(len(covers), metadata)

    def batch_value(self, X):
        X = self._check_X(X)
        covered = (X.astype(float) @ self._inc_f) > 0
        return _row_sums(covered, self.universe_weights)

    def batch_marginals(self, X):
        X = self._check_X(X)
        counts = X.astype(float) @ self._inc_f
        w = self.universe_weights
        gain_if_absent = ((counts == 0) * w) @ self._inc_f.T
        loss_if_present = ((counts == 1) * w) @ self._inc_f.T
        return np.where(X, loss_if_present, gain_if_absent)

    def _miss_factors(self, y):
        # (U, m) matrix of (1 - y_j) where j covers u, else 1
        return np.where(self.incidence.T, 1.0 - np.asarray(y, dtype=float)[None, :], 1.0)

    def multilinear(self, y):
        F = self._miss_factors(y)
        if F.size and np.any(F < 1e-12):
            with np.errstate(divide="ignore"):
                miss = np.exp(np.log(F).sum(axis=1))
        else:
            miss = F.prod(axis=1)
        return float(np.dot(self.universe_weights, 1.0 - miss))

    def multilinear_grad(self, y):
        F = self._miss_factors(y)
        U, m = F.shape
        if m == 0:
            return np.zeros(0)
        # leave-one-out products via prefix/suffix cumprods (zero-safe)
        ones = np.ones((U, 1))
        prefix = np.cumprod(np.hstack([ones, F[:, :-1]]), axis=1)
        tail = np.cumprod(F[:, ::-1], axis=1)[:, ::-1]  # tail[:, j] = prod_{k >= j}
        suffix = np.hstack([tail[:, 1:], ones])
        loo = prefix * suffix
        return (self.universe_weights[:, None] * loo * self.incidence.T).sum(axis=0)

    @property
    def has_closed_form(self):
        return True

    def params(self):
        return {
            "universe_weights": self.universe_weights.tolist(),
            "covers": [np.flatnonzero(row).tolist() for row in self.incidence],
        }


class BudgetAdditiveOracle(ValuationOracle):
    family = "budget_additive"

    def __init__(self, weights: Sequence[float], budget: float, metadata: dict | None = None):
        self.weights = _as_weights(weights, "weights")
        self.weights.setflags(write=False)
        budget = float(budget)
        if not np.isfinite(budget) or budget < 0:
            raise InstanceFormatError("budget must be finite and non-negative")
        self.budget = budget
        super().__init__(len(self.weights), metadata)

    def batch_value(self, X):
        X = self._check_X(X)
        return np.minimum(_row_sums(X, self.weights), self.budget)

    def batch_marginals(self, X):
        X = self._check_X(X)
        total = _row_sums(X, self.weights)
        without = total[:, None] - X * self.weights
        return np.minimum(without + self.weights, self.budget) - np.minimum(without, self.budget)

    def params(self):
        return {"weights": self.weights.tolist(), "budget": self.budget}


class PartitionMatroidRankOracle(ValuationOracle):
    """Rank of a partition matroid.  Items outside every block have value 0."""

    family = "partition_matroid_rank"

    def __init__(
        self,
        blocks: Sequence[Sequence[int]],
        capacities: Sequence[int],
        ground_size: int,
        metadata: dict | None = None,
    ):
        if len(blocks) != len(capacities):
            raise InstanceFormatError("blocks and capacities must have the same length")
        block_of = np.full(ground_size, -1, dtype=np.int64)
        norm_blocks = []
        for b, blk in enumerate(blocks):
            items = sorted(int(j) for j in blk)
            for j in items:
                if not 0 <= j < ground_size:
                    raise InstanceFormatError(f"blocks[{b}]: item {j} out of range")
                if block_of[j] != -1:
                    raise InstanceFormatError(f"blocks[{b}]: item {j} already in block {block_of[j]}")
                block_of[j] = b
            norm_blocks.append(tuple(items))
        caps = []
        for b, cap in enumerate(capacities):
            if int(cap) != cap or cap < 0:
                raise InstanceFormatError(f"capacities[{b}]: must be a non-negative integer")
            caps.append(int(cap))
        self.blocks = tuple(norm_blocks)
        self.capacities = np.asarray(caps, dtype=np.int64)
        self._block_of = block_of
        super().__init__(ground_size, metadata)
        member = np.zeros((len(self.blocks), ground_size))
        for b, blk in enumerate(self.blocks):
            member[b, list(blk)] = 1.0
        self._member = member

    def batch_value(self, X):
        X = self._check_X(X)
        counts = X.astype(float) @ self._member.T
        return np.minimum(counts, self.capacities).sum(axis=1).astype(float)

    def batch_marginals(self, X):
        X = self._check_X(X)
        out = np.zeros(X.shape)
        if not self.blocks:
            return out
        counts = X.astype(float) @ self._member.T
        inside = self._block_of >= 0
        blk = self._block_of[inside]
        others = counts[:, blk] - X[:, inside]
        out[:, inside] = (others < self.capacities[blk]).astype(float)
        return out

    @staticmethod
    def _expected_truncated(p: np.ndarray, cap: int) -> float:
        # E[min(Poisson-binomial(p), cap)] via a DP truncated at cap
        if cap == 0:
            return 0.0
        dist = np.zeros(cap + 1)
        dist[0] = 1.0
        for pj in p:
            shifted = np.zeros_like(dist)
            shifted[1:] = dist[:-1] * pj
            shifted[cap] += dist[cap] * pj
            dist = dist * (1.0 - pj) + shifted
        return float(np.dot(dist, np.arange(cap + 1)))

    def multilinear(self, y):
        y = np.asarray(y, dtype=float)
        return float(
            sum(self._expected_truncated(y[list(blk)], int(cap)) for blk, cap in zip(self.blocks, self.capacities))
        )

    def multilinear_grad(self, y):
        y = np.asarray(y, dtype=float)
        grad = np.zeros(self._m)
        for blk, cap in zip(self.blocks, self.capacities):
            cap = int(cap)
            for pos, j in enumerate(blk):
                rest = np.delete(y[list(blk)], pos)
                # marginal of j is Pr[fewer than cap others selected]
                if cap == 0:
                    continue
                dist = np.zeros(cap + 1)
                dist[0] = 1.0
                for pj in rest:
                    shifted = np.zeros_like(dist)
                    shifted[1:] = dist[:-1] * pj
                    shifted[cap] += dist[cap] * pj
                    dist = dist * (1.0 - pj) + shifted
                grad[j] = float(dist[:cap].sum())
        return grad

    @property
    def has_closed_form(self):
        return True

    def params(self):
        return {"blocks": [list(b) for b in self.blocks], "capacities": self.capacities.tolist()}


class ExplicitTableOracle(ValuationOracle):
    """Valuation given by its full table; ``table[b]`` is the value of the set with bitmask ``b``."""

    family = "explicit_table"

    def __init__(self, table: Sequence[float], metadata: dict | None = None, validate: bool = True):
        arr = np.asarray(table, dtype=float)
        if arr.ndim != 1 or arr.size == 0 or arr.size & (arr.size - 1):
            raise InstanceFormatError(f"table: length must be a power of two, got {arr.size}")
        m = arr.size.bit_length() - 1
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise InstanceFormatError("table: values must be finite and non-negative")
        if arr[0] != 0:
            raise InstanceFormatError("table: value of the empty set must be 0")
        self.values = arr
        self.values.setflags(write=False)
        self._powers = (1 << np.arange(m, dtype=np.int64))
        super().__init__(m, metadata)
        if validate:
            if m <= EXHAUSTIVE_LIMIT:
                report = check_properties(self)
                if not report.monotone:
                    raise PropertyViolation(f"table is not monotone: witness {report.monotone_witness}")
                if not report.submodular:
                    raise PropertyViolation(f"table is not submodular: witness {report.submodular_witness}")
            else:
                self.metadata["unchecked"] = True

    def batch_value(self, X):
        X = self._check_X(X)
        return self.values[X.astype(np.int64) @ self._powers]

    def table(self):
        return self.values.copy()

    def params(self):
        return {"table": self.values.tolist()}


class ScaledOracle(ValuationOracle):
    """``factor * base``.  Used for scale-equivariance checks; not serializable."""

    def __init__(self, base: ValuationOracle, factor: float):
        factor = float(factor)
        if not factor > 0 or not np.isfinite(factor):
            raise ValueError("scale factor must be positive and finite")
        self.base = base
        self.factor = factor
        self.family = base.family
        super().__init__(base.ground_size, base.metadata)

    def batch_value(self, X):
        return self.factor * self.base.batch_value(X)

    def batch_marginals(self, X):
        return self.factor * self.base.batch_marginals(X)

    def multilinear(self, y):
        val = self.base.multilinear(y)
        return None if val is None else self.factor * val

    def multilinear_grad(self, y):
        g = self.base.multilinear_grad(y)
        return None if g is None else self.factor * g

    @property
    def has_closed_form(self):
        return self.base.has_closed_form

    def params(self):
        raise InstanceFormatError("scaled oracles cannot be serialized")


class PaddedOracle(ValuationOracle):
    """``base`` on a ground set extended by ``extra`` zero-valued items appended at the end."""

    def __init__(self, base: ValuationOracle, extra: int):
        if extra < 0:
            raise ValueError("extra must be non-negative")
        self.base = base
        self.extra = int(extra)
        self.family = base.family
        super().__init__(base.ground_size + self.extra, base.metadata)

    def batch_value(self, X):
        X = self._check_X(X)
        return self.base.batch_value(X[:, : self.base.ground_size])

    def batch_marginals(self, X):
        X = self._check_X(X)
        out = np.zeros(X.shape)
        out[:, : self.base.ground_size] = self.base.batch_marginals(X[:, : self.base.ground_size])
        return out

    def multilinear(self, y):
        return self.base.multilinear(np.asarray(y)[: self.base.ground_size])

    def multilinear_grad(self, y):
        g = self.base.multilinear_grad(np.asarray(y)[: self.base.ground_size])
        if g is None:
            return None
        return np.concatenate([g, np.zeros(self.extra)])

    @property
    def has_closed_form(self):
        return self.base.has_closed_form

    def params(self):
        raise InstanceFormatError("padded oracles cannot be serialized")


def build_oracle(spec: dict, ground_size: int | None = None) -> ValuationOracle:
    """Construct an oracle from ``{"family": ..., "params": {...}}``.

    ``ground_size`` is required for ``partition_matroid_rank`` (blocks need
    not cover every item) and is otherwise checked against the parameters.
    """
    if not isinstance(spec, dict) or "family" not in spec:
        raise InstanceFormatError("oracle spec must be an object with a 'family' field")
    family = spec["family"]
    params = spec.get("params", {})
    if not isinstance(params, dict):
        raise InstanceFormatError("params: expected an object")
    try:
        if family == "additive":
            oracle = AdditiveOracle(params["weights"])
        elif family == "coverage":
            oracle = CoverageOracle(params["universe_weights"], params["covers"])
        elif family == "budget_additive":
            oracle = BudgetAdditiveOracle(params["weights"], params["budget"])
        elif family == "partition_matroid_rank":
            m = ground_size if ground_size is not None else params.get("ground_size")
            if m is None:
                m = 1 + max((max(b) for b in params["blocks"] if b), default=-1)
            oracle = PartitionMatroidRankOracle(params["blocks"], params["capacities"], int(m))
        elif family == "explicit_table":
            oracle = ExplicitTableOracle(params["table"])
        else:
            raise InstanceFormatError(f"family: unknown valuation family {family!r}; expected one of {FAMILIES}")
    except KeyError as exc:
        raise InstanceFormatError(f"params: missing field {exc.args[0]!r} for family {family!r}") from exc
    if ground_size is not None and oracle.ground_size != ground_size:
        if family == "explicit_table":
            raise InstanceFormatError(
                f"table: expected length 2**{ground_size} = {1 << ground_size}, got {1 << oracle.ground_size}"
            )
        raise InstanceFormatError(
            f"{family}: parameters describe {oracle.ground_size} items but the instance has m = {ground_size}"
        )
    return oracle


def table_oracle_from(oracle: ValuationOracle) -> ExplicitTableOracle:
    """Materialize any oracle as an explicit table (skips re-validation)."""
    return ExplicitTableOracle(oracle.table(), validate=False)


# -- property checks ---------------------------------------------------------

@dataclass
class PropertyReport:
    monotone: bool
    submodular: bool
    monotone_witness: tuple | None = None  # (S, j): v(S + j) < v(S)
    submodular_witness: tuple | None = None  # (S, T): v(S) + v(T) < v(S & T) + v(S | T)
    mode: str = "exhaustive"
    checked: int = 0
    notes: list = field(default_factory=list)


def _bits(mask: int) -> frozenset:
    return frozenset(j for j in range(mask.bit_length()) if mask >> j & 1)


def check_properties(
    oracle: ValuationOracle,
    samples: int = 2000,
    rng: np.random.Generator | None = None,
) -> PropertyReport:
    """Check monotonicity and submodularity.

    Exhaustive for ``m <= 12`` using the marginal form of submodularity
    (``v(S+j) + v(S+k) >= v(S+j+k) + v(S)``); witnesses are reported as the
    pair ``(S + j, S + k)``.  Larger ground sets are checked on random triples
    and the report is flagged ``mode="sampled"``.
    """
    m = oracle.ground_size
    if m <= EXHAUSTIVE_LIMIT:
        t = oracle.table()
        tol = 1e-9 * max(1.0, float(np.max(np.abs(t))) if t.size else 1.0)
        codes = np.arange(1 << m, dtype=np.int64)
        report = PropertyReport(True, True, mode="exhaustive")
        for j in range(m):
            base = codes[(codes >> j & 1) == 0]
            bad = np.flatnonzero(t[base | (1 << j)] < t[base] - tol)
            report.checked += base.size
            if bad.size and report.monotone:
                report.monotone = False
                report.monotone_witness = (_bits(int(base[bad[0]])), j)
        best = None
        for j, k in itertools.combinations(range(m), 2):
            base = codes[((codes >> j & 1) == 0) & ((codes >> k & 1) == 0)]
            lhs = t[base | (1 << j)] + t[base | (1 << k)]
            rhs = t[base | (1 << j) | (1 << k)] + t[base]
            bad = np.flatnonzero(lhs < rhs - tol)
            report.checked += base.size
            if bad.size:
                cand = (int(base[bad[0]]), j, k)
                if best is None or cand < best:
                    best = cand
        if best is not None:
            S, j, k = best
            report.submodular = False
            report.submodular_witness = (_bits(S | 1 << j), _bits(S | 1 << k))
        return report

    rng = rng if rng is not None else np.random.default_rng(0)
    report = PropertyReport(True, True, mode="sampled", checked=samples)
    if m < 2:
        return report
    R = rng.random((samples, m)) < rng.random((samples, 1))
    jk = np.array([rng.choice(m, size=2, replace=False) for _ in range(samples)])
    rows = np.arange(samples)
    R[rows, jk[:, 0]] = False
    R[rows, jk[:, 1]] = False
    Rj, Rk, Rjk = R.copy(), R.copy(), R.copy()
    Rj[rows, jk[:, 0]] = True
    Rk[rows, jk[:, 1]] = True
    Rjk[rows, jk[:, 0]] = True
    Rjk[rows, jk[:, 1]] = True
    v0, vj, vk, vjk = (oracle.batch_value(A) for A in (R, Rj, Rk, Rjk))
    tol = 1e-9 * max(1.0, float(np.max(vjk)))
    mono_bad = np.flatnonzero(vj < v0 - tol)
    if mono_bad.size:
        s = mono_bad[0]
        report.monotone = False
        report.monotone_witness = (frozenset(np.flatnonzero(R[s]).tolist()), int(jk[s, 0]))
    sub_bad = np.flatnonzero(vj + vk < vjk + v0 - tol)
    if sub_bad.size:
        s = sub_bad[0]
        report.submodular = False
        report.submodular_witness = (
            frozenset(np.flatnonzero(Rj[s]).tolist()),
            frozenset(np.flatnonzero(Rk[s]).tolist()),
        )
    return report
