"""Iterated continuous greedy for the log-multilinear relaxation.

Maximizes ``(1/n) sum_{i in A'} log V_i(y_i)`` over fractional assignments of
the items ``G'`` (column sums at most 1).  Each pass halves the current
solution and then follows the greedy direction for ``t`` in ``[1/2, 1]`` with
step ``delta``; passes repeat while the per-agent-average log gain is at
least ``gain_threshold``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import multilinear as ml
from .errors import InvariantViolation
from .rng import stream

EXACT_WHEN_POSSIBLE = "exact-when-possible"
ALWAYS_SAMPLE = "always-sample"
_RATIO_TIE = 1e-12


@dataclass
class GreedyConfig:
    """Discretization and stopping parameters.

    ``delta`` and ``samples_per_estimate`` default (``None``) to
    ``1/(4m)`` and ``ceil(50 (m+n) ln(mn+1))``.
    """

    delta: float | None = None
    samples_per_estimate: int | None = None
    gain_threshold: float = 1 / 8
    max_iterations: int = 64
    estimator_mode: str = EXACT_WHEN_POSSIBLE
    # exact enumeration is used only up to this fractional support size
    max_enum_support: int = 16

    def __post_init__(self):
        if self.estimator_mode not in (EXACT_WHEN_POSSIBLE, ALWAYS_SAMPLE):
            raise ValueError(f"unknown estimator mode {self.estimator_mode!r}")
        if not self.gain_threshold > 0:
            raise ValueError("gain_threshold must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.delta is not None:
            steps_per_pass(self.delta)
        if self.samples_per_estimate is not None and self.samples_per_estimate < 1:
            raise ValueError("samples_per_estimate must be at least 1")

    def resolve(self, n: int, m: int) -> tuple[float, int]:
        delta = self.delta if self.delta is not None else 1.0 / (4 * max(m, 1))
        samples = self.samples_per_estimate
        if samples is None:
            samples = math.ceil(50 * (m + n) * math.log(m * n + 1))
        return delta, max(int(samples), 1)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "samples_per_estimate": self.samples_per_estimate,
            "gain_threshold": self.gain_threshold,
            "max_iterations": self.max_iterations,
            "estimator_mode": self.estimator_mode,
            "max_enum_support": self.max_enum_support,
        }


def steps_per_pass(delta: float) -> int:
    if not 0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    steps = 0.5 / delta
    if abs(steps - round(steps)) > 1e-9 * steps:
        raise ValueError(f"delta = {delta} does not divide 1/2 into whole steps")
    return int(round(steps))


@dataclass
class GreedyTrace:
    # objectives[r] is (1/n) sum log V_i(y^(r)); objectives[0] is the starting point
    objectives: list = field(default_factory=list)
    objective_std_errors: list = field(default_factory=list)
    # step_objectives[r-1][s]: objective before step s of pass r (exact agents only)
    step_objectives: list = field(default_factory=list)
    # directions[r-1][s][k]: agent receiving G'-item k at step s of pass r, -1 for none
    directions: list = field(default_factory=list)
    iterations: int = 0
    delta: float | None = None
    samples_per_estimate: int | None = None
    estimators: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "objectives": [float(x) for x in self.objectives],
            "objective_std_errors": [float(x) for x in self.objective_std_errors],
            "step_objectives": [[float(x) for x in row] for row in self.step_objectives],
            "directions": self.directions,
            "iterations": self.iterations,
            "delta": self.delta,
            "samples_per_estimate": self.samples_per_estimate,
            "estimators": {str(k): v for k, v in self.estimators.items()},
        }


def complement_items(instance, H) -> list[int]:
    H = set(H)
    return [j for j in range(instance.m) if j not in H]


def active_agents(instance, H) -> list[int]:
    """Agents with positive value for ``G' = G - H``."""
    Gp = complement_items(instance, H)
    return [i for i, o in enumerate(instance.oracles) if o.value(Gp) > 0]


def greedy_direction(values: Sequence[float], weights: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Solve the per-step LP ``max sum_i (1/V_i) sum_j w_ij z_ij`` over ``z >= 0``, column sums <= 1.

    The LP separates by item: each item goes wholly to the agent with the
    largest ``w_ij / V_i`` (lowest index among ties), or to nobody if that
    ratio is 0.  Returns ``(z, chosen)`` with ``chosen[j] = -1`` for unassigned.
    """
    V = np.asarray(values, dtype=float)
    W = np.asarray(weights, dtype=float)
    if np.any(~(V > 0)):
        bad = int(np.flatnonzero(~(V > 0))[0])
        raise InvariantViolation(f"non-positive multilinear value {V[bad]!r} for active agent #{bad}")
    z = np.zeros(W.shape)
    chosen = []
    if W.size == 0:
        return z, [-1] * W.shape[1]
    ratios = W / V[:, None]
    best = ratios.max(axis=0)
    for j in range(W.shape[1]):
        if not best[j] > 0:
            chosen.append(-1)
            continue
        i = int(np.flatnonzero(ratios[:, j] >= best[j] * (1 - _RATIO_TIE))[0])
        z[i, j] = 1.0
        chosen.append(i)
    return z, chosen


class _Evaluator:
    """Value/gradient estimates for the active agents, honouring the estimator mode."""

    def __init__(self, instance, A, G, config: GreedyConfig, seed: int):
        self.instance = instance
        self.A = list(A)
        self.G = np.asarray(G, dtype=np.int64)
        self.config = config
        self.seed = seed
        self.delta, self.samples = config.resolve(instance.n, instance.m)
        self.modes: dict[int, str] = {}

    def _exact_ok(self, oracle, row) -> bool:
        if self.config.estimator_mode == ALWAYS_SAMPLE:
            return False
        return ml.can_eval_exact(oracle, row, self.config.max_enum_support)

    def value_and_gradient(self, y: np.ndarray, key: tuple) -> tuple[np.ndarray, np.ndarray]:
        vals = np.zeros(len(self.A))
        grads = np.zeros((len(self.A), self.G.size))
        for k, i in enumerate(self.A):
            oracle = self.instance.oracles[i]
            if self._exact_ok(oracle, y[i]):
                v, g = ml.value_and_gradient(oracle, y[i], self.config.max_enum_support)
                self.modes.setdefault(i, "exact")
            else:
                est, g, _ = ml.sample_value_and_gradient(oracle, y[i], self.samples, stream(self.seed, *key, i))
                v = est.mean
                self.modes[i] = "sampled"
            vals[k] = v
            grads[k] = g[self.G]
        return vals, grads

    def objective(self, y: np.ndarray, key: tuple) -> tuple[float, float, np.ndarray]:
        """``(objective, std_error, per-agent values)``."""
        vals = np.zeros(len(self.A))
        rel_var = 0.0
        for k, i in enumerate(self.A):
            oracle = self.instance.oracles[i]
            if self._exact_ok(oracle, y[i]):
                vals[k] = ml.eval_exact(oracle, y[i], self.config.max_enum_support)
            else:
                est = ml.eval_sample(oracle, y[i], self.samples, stream(self.seed, *key, i))
                vals[k] = est.mean
                if est.mean > 0:
                    rel_var += (est.std_error / est.mean) ** 2
        with np.errstate(divide="ignore"):
            obj = float(np.log(vals).sum() / self.instance.n)
        return obj, math.sqrt(rel_var) / self.instance.n, vals


def _value_floors(instance, A, G) -> np.ndarray:
    m, n = max(instance.m, 1), instance.n
    floors = []
    for i in A:
        s = instance.oracles[i].singleton_values()[list(G)]
        pos = s[s > 0]
        floors.append(pos.min() / (m * n) ** 2 if pos.size else 0.0)
    return np.asarray(floors)


def continuous_greedy_pass(
    instance,
    A: Sequence[int],
    G: Sequence[int],
    y_start: np.ndarray,
    config: GreedyConfig,
    seed: int = 0,
    pass_index: int = 1,
    _evaluator: _Evaluator | None = None,
    _trace: GreedyTrace | None = None,
) -> np.ndarray:
    """One pass: ``y(1/2) = y_start / 2``, then ``y(t + delta) = y(t) + delta z(t)`` up to ``t = 1``."""
    ml.check_feasible(y_start)
    ev = _evaluator or _Evaluator(instance, A, G, config, seed)
    A = ev.A
    Gi = ev.G
    steps = steps_per_pass(ev.delta)
    floors = _value_floors(instance, A, Gi)
    y = np.asarray(y_start, dtype=float) / 2
    step_objs, dirs = [], []
    rows = np.asarray(A, dtype=np.int64)
    for s in range(steps):
        vals, grads = ev.value_and_gradient(y, (0, pass_index, s))
        if s == 0:
            # an agent starting the pass at value 0 has no floor and wins its items until it is positive
            cold = vals <= 0
            floors = np.where(cold, 0.0, floors)
        low = np.flatnonzero(vals < floors)
        if low.size:
            k = int(low[0])
            raise InvariantViolation(
                f"value of agent {A[k]} collapsed to {vals[k]:.3g} (floor {floors[k]:.3g}) at pass {pass_index}, step {s}",
                partial=_trace,
            )
        with np.errstate(divide="ignore"):
            step_objs.append(float(np.log(vals).sum() / instance.n))
        z, chosen = greedy_direction(np.where(cold & (vals <= 0), np.finfo(float).tiny, vals), grads)
        dirs.append([-1 if c < 0 else int(A[c]) for c in chosen])
        if rows.size and Gi.size:
            y[np.ix_(rows, Gi)] += ev.delta * z
    np.clip(y, 0.0, 1.0, out=y)
    ml.check_feasible(y)
    if _trace is not None:
        _trace.step_objectives.append(step_objs)
        _trace.directions.append(dirs)
    return y


def iterated_continuous_greedy(
    instance,
    A: Sequence[int],
    G: Sequence[int],
    config: GreedyConfig | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, GreedyTrace]:
    """Run passes from ``y^(0) = 1/n`` on ``A' x G'`` until the gain drops below the threshold.

    Returns the output of the last pass and its trace.  In sampled mode the
    gain is reduced by three combined standard errors before the comparison.
    """
    config = config or GreedyConfig()
    A = list(A)
    G = list(G)
    n, m = instance.n, instance.m
    ev = _Evaluator(instance, A, G, config, seed)
    trace = GreedyTrace(delta=ev.delta, samples_per_estimate=ev.samples)
    y = np.zeros((n, m))
    if not A or not G:
        return y, trace
    y[np.ix_(A, G)] = 1.0 / n
    obj, se, _ = ev.objective(y, (1, 0))
    trace.objectives.append(obj)
    trace.objective_std_errors.append(se)
    r = 0
    while True:
        r += 1
        if r > config.max_iterations:
            trace.estimators = dict(ev.modes)
            raise InvariantViolation(
                f"iterated continuous greedy did not stop within {config.max_iterations} passes", partial=trace
            )
        y_next = continuous_greedy_pass(instance, A, G, y, config, seed, r, _evaluator=ev, _trace=trace)
        obj_next, se_next, _ = ev.objective(y_next, (1, r))
        trace.objectives.append(obj_next)
        trace.objective_std_errors.append(se_next)
        trace.iterations = r
        gain = obj_next - obj
        margin = 3 * math.sqrt(se * se + se_next * se_next)
        y = y_next
        if gain - margin < config.gain_threshold:
            break
        obj, se = obj_next, se_next
    trace.estimators = dict(ev.modes)
    return y, trace


def log_objective(instance, A: Sequence[int], y: np.ndarray) -> float:
    """Exact ``(1/n) sum_{i in A'} log V_i(y_i)``."""
    vals = [ml.eval_exact(instance.oracles[i], y[i]) for i in A]
    with np.errstate(divide="ignore"):
        return float(np.log(vals).sum() / instance.n) if vals else 0.0


def ratio_certificate(instance, A: Sequence[int], y: np.ndarray, y_star: np.ndarray) -> float:
    """``(1/n) sum_{i in A'} V_i(y*_i) / V_i(y_i)`` evaluated exactly (``inf`` if some ``V_i(y_i) = 0``)."""
    total = 0.0
    for i in A:
        num = ml.eval_exact(instance.oracles[i], y_star[i])
        den = ml.eval_exact(instance.oracles[i], y[i])
        if den <= 0:
            if num > 0:
                return float("inf")
            continue
        total += num / den
    return total / instance.n


def iteration_bound(n: int) -> int:
    return math.ceil(8 * math.log(n)) + 2
