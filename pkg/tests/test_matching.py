import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsw_submodular import AdditiveOracle, Instance, Matching, final_matching, initial_matching, max_product_matching
from nsw_submodular.generators import tightness_instance
from nsw_submodular.matching import matching_log_value


def brute_best(W):
    """Independent oracle: lexicographic (count, log-sum) optimum over all injective maps."""
    n, k = W.shape
    best_key, best = None, None
    choices = [None] + list(range(k))
    for assign in itertools.product(choices, repeat=n):
        used = [c for c in assign if c is not None]
        if len(used) != len(set(used)):
            continue
        if any(c is not None and W[i, c] <= 0 for i, c in enumerate(assign)):
            continue
        key = (len(used), sum(math.log(W[i, c]) for i, c in enumerate(assign) if c is not None))
        if best_key is None or key[0] > best_key[0] or (key[0] == best_key[0] and key[1] > best_key[1] + 1e-9):
            best_key, best = key, assign
    return best_key


def test_diag():
    assert max_product_matching(np.array([[2, 0], [0, 3]])).assignment == (0, 1)


def test_symmetric_tie_break():
    assert max_product_matching(np.ones((2, 2))).assignment == (0, 1)


def test_product_beats_greedy():
    m = max_product_matching(np.array([[5, 4], [5, 1]]))
    assert m.assignment == (1, 0)
    assert math.exp(matching_log_value(np.array([[5, 4], [5, 1]]), m)) == pytest.approx(20)


def test_zero_edges_excluded():
    m = max_product_matching(np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert m.assignment == (None, 0)


def test_empty():
    assert max_product_matching(np.zeros((2, 0))).assignment == (None, None)


def test_matching_rejects_duplicates():
    with pytest.raises(ValueError):
        Matching((1, 1))


def test_initial_matching_diag():
    inst = Instance(2, 2, (AdditiveOracle([2, 0]), AdditiveOracle([0, 3])))
    tau, H, opt_zero = initial_matching(inst)
    assert tau.assignment == (0, 1) and H == {0, 1} and not opt_zero


def test_initial_matching_m_less_than_n():
    inst = Instance(2, 1, (AdditiveOracle([1]), AdditiveOracle([1])))
    tau, H, opt_zero = initial_matching(inst)
    assert opt_zero and tau.matched_count == 1


def test_tightness_all_matched_at_one():
    inst = tightness_instance(3)
    tau, H, opt_zero = initial_matching(inst)
    assert not opt_zero
    assert all(inst.oracles[i].value([tau[i]]) == 1 for i in range(3))


def test_final_matching_empty_bundles_reduces_to_initial():
    inst = Instance(2, 3, (AdditiveOracle([2, 1, 1]), AdditiveOracle([1, 3, 1])))
    tau, H, _ = initial_matching(inst)
    sigma = final_matching(inst, [frozenset(), frozenset()], H)
    assert sigma.assignment == tau.assignment


def test_final_matching_single_agent():
    inst = Instance(1, 2, (AdditiveOracle([1, 2]),))
    sigma = final_matching(inst, [frozenset({0})], {1})
    assert sigma.assignment == (1,)


def test_final_matching_routes_contested_item():
    # agent 0 already holds value 10; item 2 matters more to agent 1 in product terms
    inst = Instance(2, 3, (AdditiveOracle([10, 0, 5]), AdditiveOracle([0, 1, 4])))
    sigma = final_matching(inst, [frozenset({0}), frozenset()], {1, 2})
    # (0->1, 1->2): 10 * 4 = 40 beats (0->2, 1->1): 15 * 1 = 15
    assert sigma.assignment == (1, 2)


def test_final_matching_perfect_with_zero_values():
    inst = Instance(2, 2, (AdditiveOracle([1, 0]), AdditiveOracle([1, 0])))
    sigma = final_matching(inst, [frozenset(), frozenset()], {0, 1})
    assert sorted(sigma.assignment) == [0, 1]


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 4), k=st.integers(0, 5), seed=st.integers(0, 10_000), zeros=st.floats(0, 0.6))
def test_matches_exhaustive_optimum(n, k, seed, zeros):
    rng = np.random.default_rng(seed)
    W = rng.random((n, k)) * 10
    W[rng.random((n, k)) < zeros] = 0
    W = np.round(W, 2)
    m = max_product_matching(W)
    count = m.matched_count
    logsum = sum(math.log(W[i, c]) for i, c in enumerate(m) if c is not None)
    best = brute_best(W)
    assert count == best[0]
    assert logsum == pytest.approx(best[1], abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), exps=st.lists(st.integers(-6, 6), min_size=3, max_size=3))
def test_row_scaling_invariance(seed, exps):
    W = np.round(np.random.default_rng(seed).random((3, 4)) * 10, 1)
    scaled = W * (10.0 ** np.array(exps))[:, None]
    assert max_product_matching(W).assignment == max_product_matching(scaled).assignment
