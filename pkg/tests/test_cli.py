import json

import pytest

from nsw_submodular.cli import main


@pytest.fixture
def tight(tmp_path):
    p = tmp_path / "tight.json"
    assert main(["generate", "tightness", "--n", "3", "--out", str(p)]) == 0
    return p


def test_generate_stdout(capsys):
    assert main(["generate", "coverage", "--n", "2", "--m", "4", "--seed", "1", "--density", "0.5"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["n"] == 2 and data["metadata"]["params"] == {"density": 0.5}


def test_solve_writes_report(tight, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["solve", str(tight), "--trials", "3", "--seed", "2", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["config"]["trials"] == 3 and len(rep["trials"]) == 3


def test_exact(tight, capsys):
    assert main(["exact", str(tight)]) == 0
    assert json.loads(capsys.readouterr().out)["enumerated"] == 3**6


def test_exact_size_limit(tight, capsys):
    assert main(["exact", str(tight), "--limit", "10"]) == 3


def test_compare_and_check(tight, capsys):
    assert main(["compare", str(tight)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["exact"]["ratio_ok_380"]
    assert main(["check", str(tight), "--c", "1", "--d", "3"]) == 0


def test_invalid_input(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{")
    assert main(["solve", str(p)]) == 2
    assert main(["solve", str(tmp_path / "missing.json")]) == 2
    assert main(["generate", "tightness", "--n", "4"]) == 2


def test_invariant_exit_code(tight, capsys):
    assert main(["solve", str(tight), "--gain-threshold", "1e-300", "--max-iters", "1"]) in (0, 4)
    p = tight.parent / "add.json"
    main(["generate", "additive", "--n", "2", "--m", "6", "--seed", "3", "--out", str(p)])
    assert main(["solve", str(p), "--gain-threshold", "1e-300", "--max-iters", "1"]) == 4


def test_sampled_flags(tight, capsys):
    assert main(["solve", str(tight), "--estimator", "always-sample", "--samples", "64", "--delta", "0.125"]) == 0


def test_bench_generated(capsys):
    assert main(["bench", "--family", "additive", "--n", "2", "--m", "5", "--repeat", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["summary"]["instances"] == 2
