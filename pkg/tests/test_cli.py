import json
from pathlib import Path

import pytest

from conspaste.cli import main
from conspaste.scenario import load_scenario, run_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

EXPECTED = {
    "error_bad_config": 2,
    "error_not_compatible": 3,
    "error_no_contraction": 4,
    "error_region_too_tight": 5,
    "error_kernel_too_wide": 6,
    "error_solver_failure": 7,
    "error_not_diffeo": 8,
    "error_not_conservative": 9,
    "error_target_unreachable": 10,
    "error_no_twist": 11,
}


def all_scenarios():
    return sorted(p.stem for p in SCENARIOS.glob("*.json"))


@pytest.mark.parametrize("name", all_scenarios())
def test_scenario_exit_code(name, tmp_path, capsys):
    code = main(["run", str(SCENARIOS / f"{name}.json"), "--out", str(tmp_path)])
    assert code == EXPECTED.get(name, 0)
    err = capsys.readouterr().err
    if code:
        assert err.startswith("error [")
    else:
        assert (tmp_path / "report.json").exists()


def test_every_error_code_is_shipped():
    assert set(EXPECTED) <= set(all_scenarios())
    assert sorted(EXPECTED.values()) == list(range(2, 12))


@pytest.mark.parametrize("name", ["paste_ball", "moser_torus", "sweep_annulus", "symplectic_standard"])
def test_reruns_are_byte_identical(name, tmp_path):
    cfg = load_scenario(SCENARIOS / f"{name}.json")
    run_scenario(cfg, tmp_path / "a")
    run_scenario(cfg, tmp_path / "b")
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    bad.write_text(json.dumps({"kind": "nonsense"}))
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    bad.write_text(json.dumps({"kind": "divsolve", "grid": 16, "g": {"recipe": "trig", "terms": [{"factors": [["tan", 1]]}]}}))
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2


def test_overrides_and_inspect(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", str(SCENARIOS / "divsolve_torus.json"), "--out", str(out), "--grid", "32", "--seed", "5"]) == 0
    capsys.readouterr()
    assert main(["inspect", str(out / "v.cvf")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["header"]["sizes"] == [32, 32]
    assert "c1" in info["norms"]
    bogus = tmp_path / "x.cvf"
    bogus.write_bytes(b"nope")
    assert main(["inspect", str(bogus)]) == 2
