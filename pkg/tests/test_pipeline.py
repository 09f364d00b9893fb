import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from nsw_submodular import (
    AdditiveOracle,
    GreedyConfig,
    Instance,
    InstanceFormatError,
    PipelineConfig,
    brute_force_nsw,
    compare_command,
    generate_instance,
    golden_instances,
    load_instance,
    run_pipeline,
    save_instance,
)
from nsw_submodular.generators import tightness_instance
from nsw_submodular.pipeline import (
    allocation_is_valid,
    assign_leftovers,
    best_allocation,
    check_command,
    dumps_report,
    strip_timing,
)

FIELDS = {"instance_meta", "tau", "H", "A_prime", "opt_zero", "greedy_trace", "trials", "best"}


def test_single_agent_gets_everything():
    inst = generate_instance("coverage", 1, 6, seed=4, density=0.5)
    rep = run_pipeline(inst)
    assert best_allocation(rep) == [frozenset(range(6))]
    assert rep["best"]["log_nsw"] == pytest.approx(math.log(inst.oracles[0].value(range(6))))


def test_diag_reaches_optimum():
    inst = Instance(2, 2, (AdditiveOracle([2, 0]), AdditiveOracle([0, 3])))
    rep = compare_command(inst)
    assert rep["best"]["log_nsw"] == pytest.approx(math.log(math.sqrt(6)))
    assert rep["exact"]["ratio"] == pytest.approx(1.0)


def test_report_fields():
    rep = compare_command(generate_instance("coverage", 2, 6, seed=8))
    assert FIELDS <= rep.keys()
    assert {"opt_log_nsw", "ratio"} <= rep["exact"].keys()
    assert "greedy" in rep["certificates"]
    json.loads(dumps_report(rep))


def test_opt_zero_path():
    inst = generate_instance("coverage", 2, 4, seed=3, density=0.0)
    rep = run_pipeline(inst)
    assert rep["opt_zero"] and rep["best"]["log_nsw"] == -math.inf
    assert rep["trials"] == [] and rep["notes"]
    assert '"-inf"' in dumps_report(rep)


def test_m_less_than_n():
    rep = compare_command(generate_instance("additive", 3, 2, seed=7))
    assert rep["opt_zero"] and rep["exact"]["ratio"] is None


def test_best_is_max_over_trials():
    inst = generate_instance("budget_additive", 3, 8, seed=2)
    rep = run_pipeline(inst, PipelineConfig(trials=8))
    assert rep["best"]["log_nsw"] == pytest.approx(max(t["log_nsw"] for t in rep["trials"]), abs=1e-9)
    assert allocation_is_valid(inst, rep) == []


def test_assign_leftovers_never_hurts():
    inst = generate_instance("additive", 3, 8, seed=5)
    base = run_pipeline(inst, PipelineConfig(trials=2, seed=1))
    more = run_pipeline(inst, PipelineConfig(trials=2, seed=1, assign_leftovers=True))
    assert more["best"]["log_nsw"] >= base["best"]["log_nsw"]
    assert more["best"]["discarded"] == []
    assert set().union(*best_allocation(more)) == set(range(8))


def test_assign_leftovers_gain_rule():
    inst = Instance(2, 2, (AdditiveOracle([1, 1]), AdditiveOracle([1, 5])))
    alloc, given_ = assign_leftovers(inst, [frozenset({0}), frozenset()], [1])
    assert given_ == {1: 1}


@pytest.mark.parametrize("family", ["additive", "coverage", "budget_additive", "partition_matroid_rank"])
def test_determinism(family):
    inst = generate_instance(family, 3, 7, seed=17)
    cfg = PipelineConfig(seed=9, trials=4)
    a, b = run_pipeline(inst, cfg), run_pipeline(inst, cfg)
    assert dumps_report(strip_timing(a)) == dumps_report(strip_timing(b))


def test_determinism_sampled():
    inst = generate_instance("coverage", 3, 9, seed=1)
    cfg = PipelineConfig(GreedyConfig(estimator_mode="always-sample", samples_per_estimate=128), trials=4)
    a, b = run_pipeline(inst, cfg), run_pipeline(inst, cfg)
    assert dumps_report(strip_timing(a)) == dumps_report(strip_timing(b))


@settings(max_examples=60, deadline=None)
@given(idx=st.integers(0, 10_000), exps=st.lists(st.sampled_from([-6, 0, 6]), min_size=3, max_size=3))
def test_scale_equivariance(idx, exps):
    cases = [c for c in golden_instances() if "opt_zero" not in c.tags]
    inst = cases[idx % len(cases)].instance
    lam = [10.0**e for e in exps[: inst.n]] + [1.0] * max(0, inst.n - len(exps))
    cfg = PipelineConfig(trials=4)
    a = run_pipeline(inst, cfg)
    b = run_pipeline(inst.scaled(lam), cfg)
    assert a["best"]["allocation"] == b["best"]["allocation"]
    shift = sum(math.log(x) for x in lam) / inst.n
    assert b["best"]["log_nsw"] == pytest.approx(a["best"]["log_nsw"] + shift, abs=1e-6)


def test_partial_report_on_failure():
    inst = generate_instance("additive", 2, 6, seed=3)
    cfg = PipelineConfig(GreedyConfig(gain_threshold=1e-300, max_iterations=1))
    with pytest.raises(Exception) as info:
        run_pipeline(inst, cfg)
    assert isinstance(info.value.partial, dict) and "tau" in info.value.partial


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(c=0)
    with pytest.raises(ValueError):
        PipelineConfig(trials=0)
    with pytest.raises(ValueError):
        PipelineConfig(d=1)
    assert PipelineConfig(c=2).d_value == 4


def test_check_command_tightness():
    rep = check_command(tightness_instance(3))
    certs = rep["certificates"]
    assert certs["ok"]
    assert certs["matching_extension"]["ok"]
    assert rep["exact"]["opt_log_nsw"] == pytest.approx(math.log(3) / 3)


# -- instance files and generators -------------------------------------------------

def test_round_trip(tmp_path):
    inst = tightness_instance(3)
    p = tmp_path / "t.json"
    save_instance(inst, p)
    back = load_instance(p)
    assert back == inst
    q = tmp_path / "u.json"
    save_instance(back, q)
    assert p.read_bytes() == q.read_bytes()


@pytest.mark.parametrize("family", ["additive", "coverage", "budget_additive", "partition_matroid_rank"])
def test_generator_seed_determinism(family):
    assert generate_instance(family, 3, 6, seed=4).dumps() == generate_instance(family, 3, 6, seed=4).dumps()
    assert generate_instance(family, 3, 6, seed=4).dumps() != generate_instance(family, 3, 6, seed=5).dumps()


def test_tightness_generator_shape():
    inst = generate_instance("tightness", 3)
    assert (inst.n, inst.m) == (3, 6)
    H = range(3)
    assert inst.oracles[0].value(range(6)) == 3
    assert inst.oracles[0].value(range(3, 6)) == 0
    assert all(inst.oracles[i].value([j]) == 1 for i in (1, 2) for j in range(6))
    assert inst.oracles[1].value(H) == 1


def test_bad_family_names_field(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"n": 1, "m": 1, "agents": [{"family": "xos", "params": {}}]}))
    with pytest.raises(InstanceFormatError, match=r"agents\[0\].*family"):
        load_instance(p)


def test_bad_table_length(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"n": 1, "m": 2, "agents": [{"family": "explicit_table", "params": {"table": [0, 1]}}]}))
    with pytest.raises(InstanceFormatError, match="2\\*\\*2 = 4"):
        load_instance(p)


def test_parse_error_has_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"n": 1,\n "m": }')
    with pytest.raises(InstanceFormatError, match="line 2"):
        load_instance(p)


def test_missing_field():
    with pytest.raises(InstanceFormatError, match="agents"):
        Instance.from_dict({"n": 1, "m": 1})


def test_density_zero_is_opt_zero():
    inst = generate_instance("coverage", 2, 5, seed=0, density=0.0)
    assert brute_force_nsw(inst).log_nsw == -math.inf
    assert run_pipeline(inst)["opt_zero"]


def test_invalid_sizes():
    with pytest.raises(InstanceFormatError):
        generate_instance("additive", 0, 3)
    with pytest.raises(InstanceFormatError):
        generate_instance("tightness", 4)
