import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsw_submodular import AdditiveOracle, CoverageOracle, generate_instance
from nsw_submodular import multilinear as ml
from nsw_submodular.errors import InvariantViolation, SupportTooLarge
from nsw_submodular.valuations import table_oracle_from

FAMILIES = ["additive", "coverage", "budget_additive", "partition_matroid_rank"]


def brute_V(oracle, y):
    """Independent oracle: the defining sum over all subsets."""
    m = len(y)
    total = 0.0
    for r in range(m + 1):
        for S in itertools.combinations(range(m), r):
            p = 1.0
            for j in range(m):
                p *= y[j] if j in S else 1 - y[j]
            total += p * oracle.value(S)
    return total


@pytest.fixture
def cover():
    return CoverageOracle([1.0, 1.0], [[0], [0, 1]])


def test_additive_linear():
    assert ml.eval_exact(AdditiveOracle([2, 0]), [0.5, 1.0]) == pytest.approx(1.0)


def test_coverage_example(cover):
    assert ml.eval_exact(cover, [0.5, 0.5]) == pytest.approx(1.25)
    assert ml.partial_derivative(cover, [0, 0.5], 0) == pytest.approx(0.5)
    assert ml.eval_overlay(cover, [0.5, 0], [1]) == pytest.approx(2.0)


def test_partial_additive():
    assert ml.partial_derivative(AdditiveOracle([2, 0]), [0.3, 0.9], 0) == pytest.approx(2)


def test_overlay_empty_is_identity(cover):
    y = [0.2, 0.7]
    assert ml.eval_overlay(cover, y, []) == ml.eval_exact(cover, y)


def test_overlay_from_zero_gives_singleton(cover):
    assert ml.eval_overlay(cover, [0, 0], [0]) == cover.value([0])


def test_zero_singleton_gives_zero_derivative():
    o = AdditiveOracle([1, 0, 3])
    assert ml.partial_derivative(o, [0.5, 0.5, 0.5], 1) == 0


def test_sample_of_vertex_is_exact(cover):
    est = ml.eval_sample(cover, [1, 0], 50, np.random.default_rng(0))
    assert est.mean == 1 and est.std_error == 0 and est.samples == 50


def test_sample_additive_calibration():
    o = AdditiveOracle([2, 0])
    est = ml.eval_sample(o, [0.5, 1.0], 10_000, np.random.default_rng(3))
    assert abs(est.mean - 1.0) <= 3 * est.std_error


def test_sampled_derivative_in_range(cover):
    est = ml.partial_derivative(cover, [0.3, 0.6], 0, samples=2000, rng=np.random.default_rng(1))
    assert 0 <= est.mean <= cover.value([0])


def test_support_too_large_without_closed_form():
    o = generate_instance("budget_additive", 1, 30, seed=0).oracles[0]
    y = np.full(30, 0.5)
    assert not ml.can_eval_exact(o, y)
    with pytest.raises(SupportTooLarge):
        ml.eval_exact(o, y)


def test_coverage_closed_form_large_support():
    o = generate_instance("coverage", 1, 40, seed=0).oracles[0]
    assert ml.can_eval_exact(o, np.full(40, 0.5))


def test_coverage_tiny_factors_log_path():
    o = CoverageOracle([1.0], [[0], [0]])
    y = np.array([1 - 1e-14, 1 - 1e-14])
    assert ml.eval_exact(o, y) == pytest.approx(1.0, abs=1e-12)


def test_feasibility():
    assert ml.is_feasible(np.array([[0.5, 1], [0.5, 0]]))
    assert not ml.is_feasible(np.array([[0.6], [0.5]]))
    with pytest.raises(InvariantViolation):
        ml.check_feasible(np.array([[0.6], [0.5]]))


def test_restrict_and_overlay():
    y = np.array([0.2, 0.4, 0.6])
    assert ml.restrict(y, [1]).tolist() == [0, 0.4, 0]
    assert ml.overlay(y, [0]).tolist() == [1, 0.4, 0.6]


@pytest.mark.parametrize("family", FAMILIES)
def test_matches_defining_sum(family):
    o = generate_instance(family, 1, 6, seed=9).oracles[0]
    y = np.random.default_rng(0).random(6)
    assert ml.eval_exact(o, y) == pytest.approx(brute_V(o, y), abs=1e-12)


@pytest.mark.parametrize("family", FAMILIES)
def test_closed_form_matches_enumeration(family):
    o = generate_instance(family, 1, 9, seed=4).oracles[0]
    t = table_oracle_from(o)
    y = np.random.default_rng(1).random(9)
    assert ml.eval_exact(o, y) == pytest.approx(ml.eval_exact(t, y), abs=1e-10)
    np.testing.assert_allclose(ml.gradient(o, y), ml.gradient(t, y), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), family=st.sampled_from(FAMILIES))
def test_derivative_identity(seed, family):
    m = 7
    o = generate_instance(family, 1, m, seed=seed).oracles[0]
    rng = np.random.default_rng(seed)
    y = rng.random(m)
    j = int(rng.integers(m))
    hi, lo = y.copy(), y.copy()
    hi[j], lo[j] = 1, 0
    d = ml.partial_derivative(o, y, j)
    assert d == ml.eval_exact(o, hi) - ml.eval_exact(o, lo)
    h = 1e-3
    yp, ym = y.copy(), y.copy()
    yp[j] = min(1, y[j] + h)
    ym[j] = max(0, y[j] - h)
    fd = (ml.eval_exact(o, yp) - ml.eval_exact(o, ym)) / (yp[j] - ym[j])
    assert abs(fd - d) <= 1e-9 * max(1, abs(d))
    assert ml.gradient(o, y)[j] == pytest.approx(d, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), family=st.sampled_from(FAMILIES))
def test_directional_monotone_and_concave(seed, family):
    m = 8
    o = generate_instance(family, 1, m, seed=seed).oracles[0]
    rng = np.random.default_rng(seed)
    d = rng.random(m)
    y0 = rng.random(m) * 0.3
    tmax = float(np.min((1 - y0) / np.maximum(d, 1e-12)))
    ts = np.linspace(0, min(tmax, 1.0), 9)
    g = [ml.eval_exact(o, y0 + t * d) for t in ts]
    assert all(g[k + 1] >= g[k] - 1e-9 for k in range(len(g) - 1))
    for a in range(len(ts)):
        for b in range(a + 2, len(ts), 2):
            mid = (a + b) // 2
            assert g[a] + g[b] <= 2 * g[mid] + 1e-9


def test_calibration_rate():
    o = generate_instance("coverage", 1, 8, seed=2).oracles[0]
    y = np.random.default_rng(0).random(8)
    exact = ml.eval_exact(o, y)
    hits = 0
    for s in range(200):
        est = ml.eval_sample(o, y, 400, np.random.default_rng(s))
        hits += abs(est.mean - exact) <= 3 * est.std_error
    assert hits >= 198
