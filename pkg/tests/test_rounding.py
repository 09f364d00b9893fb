import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsw_submodular import AdditiveOracle, Instance, InvariantViolation, generate_instance
from nsw_submodular import multilinear as ml
from nsw_submodular.rounding import (
    UNASSIGNED,
    find_large_set,
    large_set_postconditions,
    pad_with_dummies,
    randomized_rounding,
    restricted_randomized_rounding,
)


def test_certain_item():
    out = randomized_rounding(np.array([[1.0], [0.0]]), np.random.default_rng(0))
    assert out.bundles[0] == {0}


def test_zero_matrix():
    out = randomized_rounding(np.zeros((2, 3)), np.random.default_rng(0))
    assert all(not b for b in out.bundles)
    assert (out.Z == UNASSIGNED).all()


def test_infeasible_column():
    with pytest.raises(InvariantViolation):
        randomized_rounding(np.array([[0.7], [0.6]]), np.random.default_rng(0))


def test_column_frequency():
    y = np.array([[0.3], [0.7]])
    hits = sum(randomized_rounding(y, np.random.default_rng(s)).Z[0] == 0 for s in range(20_000))
    assert abs(hits / 20_000 - 0.3) <= 4 * np.sqrt(0.21 / 20_000)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_bundles_disjoint_and_within_support(seed):
    rng = np.random.default_rng(seed)
    y = rng.random((3, 5))
    y /= y.sum(axis=0, keepdims=True) * rng.uniform(1, 2, 5)
    y[:, 2] = 0
    out = randomized_rounding(y, rng)
    seen = set()
    for b in out.bundles:
        assert not (b & seen)
        seen |= b
    assert 2 not in seen


def test_find_large_set_additive_example():
    inst = Instance(1, 3, (AdditiveOracle([5, 3, 1]),))
    L = find_large_set(inst, 0, np.array([0.4, 0.5, 0.8]), 1.0)
    assert L == [0, 1, 2]
    assert np.array([0.4, 0.5, 0.8])[L].sum() == pytest.approx(1.7)


def test_find_large_set_single_full_item():
    inst = Instance(1, 3, (AdditiveOracle([1, 2, 3]),))
    assert find_large_set(inst, 0, np.array([0, 1.0, 0]), 1.0, [1]) == [1]


def test_find_large_set_zero_values():
    inst = Instance(1, 3, (AdditiveOracle([0, 0, 0]),))
    y = np.array([0.5, 0.5, 0.5])
    L = find_large_set(inst, 0, y, 1.0)
    assert L == [0, 1]
    post = large_set_postconditions(inst.oracles[0], y, L, 1.0, range(3))
    assert post["mass_ok"] and post["marginal_ok"]


def test_find_large_set_requires_mass():
    inst = Instance(1, 2, (AdditiveOracle([1, 1]),))
    with pytest.raises(ValueError, match="pad_with_dummies"):
        find_large_set(inst, 0, np.array([0.2, 0.2]), 1.0)


def test_padding():
    inst = Instance(2, 2, (AdditiveOracle([1, 1]), AdditiveOracle([2, 0])))
    y = np.array([[1.0, 0.5], [0.0, 0.0]])
    p, yp = pad_with_dummies(inst, y, 1.0)
    assert p.m == 2 + 2
    np.testing.assert_array_equal(yp[:, :2], y)
    assert yp[0, 2:].sum() == 0
    assert yp[1].sum() == pytest.approx(1.0)
    assert ml.is_feasible(yp)
    assert p.oracles[1].value([0, 2, 3]) == inst.oracles[1].value([0])


def test_restricted_rounding_all_large():
    inst = Instance(1, 2, (AdditiveOracle([1, 2]),))
    y = np.array([[0.5, 0.5]])
    sol = restricted_randomized_rounding(inst, y, 1.0, np.random.default_rng(0))
    assert sol.small_sets[0] == frozenset()
    np.testing.assert_array_equal(sol.y_sparse, y)


@pytest.mark.parametrize("family", ["additive", "coverage", "budget_additive", "partition_matroid_rank"])
def test_sparsified_invariants(family):
    inst = generate_instance(family, 3, 8, seed=21)
    rng = np.random.default_rng(0)
    y = rng.random((3, 8))
    y /= y.sum(axis=0, keepdims=True)
    y *= 0.3
    p, yp = pad_with_dummies(inst, y, 1.0)
    sol = restricted_randomized_rounding(p, yp, 1.0, rng)
    R = sol.outcome.bundles
    seen = set()
    for i in range(3):
        L, S = sol.large_sets[i], sol.small_sets[i]
        assert not set(L) & S
        assert not S & seen
        seen |= S
        assert S <= R[i]
        post = large_set_postconditions(p.oracles[i], yp[i], L, 1.0, range(p.m))
        assert post["mass_ok"] and post["marginal_ok"]
