"""Multilinear extension ``V(y) = E[v(R)]`` with ``R`` containing each item ``j``
independently with probability ``y_j``.

Exact evaluation uses the oracle's closed form when it has one (additive,
coverage, partition-matroid rank) and otherwise enumerates the fractional
support of ``y``; coordinates equal to 0 or 1 are deterministic and do not
enlarge the enumeration.  Monte Carlo estimators return an :class:`Estimate`.

Fractional allocations are plain ``(n, m)`` float arrays; the helpers at the
bottom of this module cover the operations the algorithm needs on them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import InvariantViolation, SupportTooLarge
from .valuations import ValuationOracle

FEASIBILITY_TOL = 1e-9
MAX_ENUM_SUPPORT = 25
_CHUNK_CELLS = 1 << 22


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    samples: int

    def __post_init__(self):
        if self.samples < 1 or self.std_error < 0:
            raise ValueError("invalid estimate")


def _check_row(oracle: ValuationOracle, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (oracle.ground_size,):
        raise ValueError(f"expected a vector of length {oracle.ground_size}, got shape {y.shape}")
    if np.any(y < -FEASIBILITY_TOL) or np.any(y > 1 + FEASIBILITY_TOL):
        raise ValueError("coordinates of y must lie in [0, 1]")
    return np.clip(y, 0.0, 1.0)


def fractional_support(y: np.ndarray) -> np.ndarray:
    return np.flatnonzero((y > 0) & (y < 1))


def _enumerate(y: np.ndarray, max_support: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(X, p)`` chunks covering every outcome of ``R`` with its probability."""
    frac = fractional_support(y)
    s = frac.size
    if s > max_support:
        raise SupportTooLarge(f"fractional support {s} exceeds enumeration limit {max_support}")
    base = y >= 1
    m = y.size
    total = 1 << s
    chunk = max(1, min(total, _CHUNK_CELLS // max(m, 1)))
    p_in = y[frac]
    p_out = 1.0 - p_in
    shifts = np.arange(s, dtype=np.int64)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk), dtype=np.int64)
        bits = ((codes[:, None] >> shifts) & 1).astype(bool)
        X = np.broadcast_to(base, (codes.size, m)).copy()
        X[:, frac] = bits
        probs = np.where(bits, p_in, p_out).prod(axis=1) if s else np.ones(codes.size)
        yield X, probs


def can_eval_exact(oracle: ValuationOracle, y, max_support: int = MAX_ENUM_SUPPORT) -> bool:
    return oracle.has_closed_form or fractional_support(np.asarray(y)).size <= max_support


def eval_exact(oracle: ValuationOracle, y, max_support: int = MAX_ENUM_SUPPORT) -> float:
    """Exact ``V(y)``.

    Raises :class:`SupportTooLarge` when no closed form exists and the
    fractional support of ``y`` exceeds ``max_support``.
    """
    y = _check_row(oracle, y)
    if fractional_support(y).size == 0:
        # vertex: answer with the oracle itself so V(1_S) == v(S) bit for bit
        return float(oracle.batch_value((y >= 1)[None, :])[0])
    if oracle.has_closed_form:
        return float(oracle.multilinear(y))
    return float(sum(float(p @ oracle.batch_value(X)) for X, p in _enumerate(y, max_support)))


def gradient(oracle: ValuationOracle, y, max_support: int = MAX_ENUM_SUPPORT) -> np.ndarray:
    """All partial derivatives ``V(y | y_j = 1) - V(y | y_j = 0)`` at once."""
    y = _check_row(oracle, y)
    if oracle.has_closed_form:
        return np.asarray(oracle.multilinear_grad(y), dtype=float)
    grad = np.zeros(y.size)
    for X, p in _enumerate(y, max_support):
        grad += p @ oracle.batch_marginals(X)
    return grad


def value_and_gradient(oracle: ValuationOracle, y, max_support: int = MAX_ENUM_SUPPORT) -> tuple[float, np.ndarray]:
    y = _check_row(oracle, y)
    if oracle.has_closed_form:
        return float(oracle.multilinear(y)), np.asarray(oracle.multilinear_grad(y), dtype=float)
    val = 0.0
    grad = np.zeros(y.size)
    for X, p in _enumerate(y, max_support):
        val += float(p @ oracle.batch_value(X))
        grad += p @ oracle.batch_marginals(X)
    return val, grad


def _draw(y: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    return rng.random((count, y.size)) < y


def _estimate(values: np.ndarray) -> Estimate:
    k = values.shape[0]
    se = float(np.std(values, ddof=1) / np.sqrt(k)) if k > 1 else 0.0
    return Estimate(float(np.mean(values)), se, k)


def eval_sample(oracle: ValuationOracle, y, sample_count: int, rng: np.random.Generator) -> Estimate:
    """Monte Carlo estimate of ``V(y)``: the mean of ``v(R)`` over independent draws."""
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    y = _check_row(oracle, y)
    return _estimate(oracle.batch_value(_draw(y, sample_count, rng)))


def sample_value_and_gradient(
    oracle: ValuationOracle, y, sample_count: int, rng: np.random.Generator
) -> tuple[Estimate, np.ndarray, np.ndarray]:
    """Estimate ``V(y)`` and every partial derivative from one shared batch of draws.

    Returns ``(value_estimate, grad_means, grad_std_errors)``.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    y = _check_row(oracle, y)
    X = _draw(y, sample_count, rng)
    value = _estimate(oracle.batch_value(X))
    marg = oracle.batch_marginals(X)
    means = marg.mean(axis=0)
    if sample_count > 1:
        se = marg.std(axis=0, ddof=1) / np.sqrt(sample_count)
    else:
        se = np.zeros(y.size)
    return value, means, se


def partial_derivative(
    oracle: ValuationOracle,
    y,
    j: int,
    samples: int | None = None,
    rng: np.random.Generator | None = None,
    max_support: int = MAX_ENUM_SUPPORT,
):
    """``dV/dy_j``.

    Exact mode (``samples is None``) returns ``V(y | y_j=1) - V(y | y_j=0)``,
    which equals the derivative because ``V`` is linear in each coordinate.
    Sampled mode averages ``v(R + j) - v(R - j)`` and returns an
    :class:`Estimate`.
    """
    y = _check_row(oracle, y)
    j = int(j)
    if not 0 <= j < y.size:
        raise IndexError(f"item {j} out of range")
    if samples is None:
        hi, lo = y.copy(), y.copy()
        hi[j], lo[j] = 1.0, 0.0
        return eval_exact(oracle, hi, max_support) - eval_exact(oracle, lo, max_support)
    if rng is None:
        raise ValueError("sampled mode needs an rng")
    X = _draw(y, samples, rng)
    on, off = X.copy(), X.copy()
    on[:, j], off[:, j] = True, False
    return _estimate(oracle.batch_value(on) - oracle.batch_value(off))


def eval_overlay(
    oracle: ValuationOracle,
    y,
    S: Iterable[int],
    samples: int | None = None,
    rng: np.random.Generator | None = None,
    max_support: int = MAX_ENUM_SUPPORT,
):
    """``V(y + 1_S)``, i.e. ``V`` with the coordinates in ``S`` forced to 1."""
    z = overlay(_check_row(oracle, y), S)
    if samples is None:
        return eval_exact(oracle, z, max_support)
    if rng is None:
        raise ValueError("sampled mode needs an rng")
    return eval_sample(oracle, z, samples, rng)


# -- fractional allocations --------------------------------------------------

def restrict(y: np.ndarray, S: Iterable[int]) -> np.ndarray:
    """Copy of ``y`` with every coordinate outside ``S`` set to 0 (last axis)."""
    y = np.asarray(y, dtype=float)
    keep = np.zeros(y.shape[-1], dtype=bool)
    keep[list(S)] = True
    return np.where(keep, y, 0.0)


def overlay(y: np.ndarray, S: Iterable[int]) -> np.ndarray:
    """Copy of ``y`` with the coordinates in ``S`` set to 1 (last axis)."""
    z = np.array(y, dtype=float)
    idx = list(S)
    if idx:
        z[..., idx] = 1.0
    return z


def column_sums(y: np.ndarray) -> np.ndarray:
    return np.asarray(y, dtype=float).sum(axis=0)


def is_feasible(y: np.ndarray, tol: float = FEASIBILITY_TOL) -> bool:
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        return True
    return bool(np.all(y >= -tol) and np.all(y <= 1 + tol) and np.all(column_sums(y) <= 1 + tol))


def check_feasible(y: np.ndarray, tol: float = FEASIBILITY_TOL) -> None:
    if not is_feasible(y, tol):
        worst = float(column_sums(y).max()) if np.size(y) else 0.0
        raise InvariantViolation(f"infeasible fractional allocation (max column sum {worst:.12g})")
