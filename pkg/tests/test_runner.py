import json
import os

import numpy as np
import pytest

from colldeco.errors import InputError
from colldeco.quad import DEFAULT_SPEC
from colldeco.runner.cli import main
from colldeco.runner.modes import run
from colldeco.runner.scenario import parse_scenario, parse_scenario_text

HERE = os.path.dirname(__file__)
SCENARIOS = os.path.join(HERE, os.pardir, "scenarios")

MINIMAL = """
[gas]
mass = 1.0
beta = 1.0
density = 1.0

[channels]
energies = [0.0]

[model]
type = "constant"
c = 1.0
"""

QLBE_SMALL = """
seed = 4

[gas]
mass = 1.0
beta = 1.0
density = 1.0

[brownian]
mass = 1.0

[model]
type = "hard_sphere"
radius = 1.0

[grid]
points = 7

[evolution]
t_end = 0.2
dt = 0.001
monitor_every = 10

[initial]
kind = "thermal"
"""


def load(path):
    with open(path) as fh:
        return json.load(fh)


def test_minimal_scenario_gets_defaults():
    sc = parse_scenario_text(MINIMAL, "channel-rates")
    assert sc.seed == 0 and sc.threads == 1 and sc.warnings == []
    assert sc.quadrature() == DEFAULT_SPEC
    assert sc.basis().energies == (0.0,)


def test_negative_beta_names_field():
    with pytest.raises(InputError) as exc:
        parse_scenario_text(MINIMAL.replace("beta = 1.0", "beta = -1.0"), "channel-rates")
    assert exc.value.code == "VALIDATION_ERROR"
    assert "gas.beta" in [e["field"] for e in exc.value.context["errors"]]


def test_all_validation_errors_reported():
    text = MINIMAL.replace("beta = 1.0", "beta = -1.0").replace("density = 1.0", "density = 0.0")
    with pytest.raises(InputError) as exc:
        parse_scenario_text(text, "channel-rates")
    fields = {e["field"] for e in exc.value.context["errors"]}
    assert {"gas.beta", "gas.density"} <= fields


def test_missing_section_for_mode():
    with pytest.raises(InputError) as exc:
        parse_scenario_text(MINIMAL, "qlbe-rates")
    assert any(e["field"].startswith("brownian") for e in exc.value.context["errors"])


def test_unknown_key_is_warning():
    sc = parse_scenario_text(MINIMAL + "\n[future]\nknob = 3\n", "channel-rates")
    assert any("future" in w for w in sc.warnings)


def test_parse_error_location():
    with pytest.raises(InputError) as exc:
        parse_scenario_text("[gas]\nmass = = 1\n", "channel-rates")
    assert exc.value.code == "PARSE_ERROR"
    assert exc.value.context["line"] == 2 and exc.value.context["column"] is not None


def test_unknown_mode():
    with pytest.raises(InputError):
        parse_scenario_text(MINIMAL, "plot")


def test_channel_rates_oracle(tmp_path):
    sc = parse_scenario(os.path.join(SCENARIOS, "channel_rates.toml"), "channel-rates")
    assert run(sc, str(tmp_path)) == 0
    tensor = load(tmp_path / "rate_tensor.json")
    assert tensor["m"][0][0] == pytest.approx(20.053026197048534, rel=1e-6)
    manifest = load(tmp_path / "run_manifest.json")
    assert manifest["exit_status"] == 0 and manifest["seed"] == 1
    assert set(manifest["versions"]) >= {"colldeco", "numpy", "scipy", "python"}
    assert manifest["scenario"]["gas"]["beta"] == 1.0


def test_manifest_lists_every_output(tmp_path):
    sc = parse_scenario(os.path.join(SCENARIOS, "channel_evolve.toml"), "channel-evolve")
    assert run(sc, str(tmp_path)) == 0
    listed = set(load(tmp_path / "run_manifest.json")["outputs"])
    assert listed | {"run_manifest.json"} == set(os.listdir(tmp_path))


def test_channel_evolve_csv_format(tmp_path):
    sc = parse_scenario(os.path.join(SCENARIOS, "channel_evolve.toml"), "channel-evolve")
    run(sc, str(tmp_path))
    raw = (tmp_path / "trajectory.csv").read_bytes()
    assert b"\r" not in raw
    header, first = raw.decode().splitlines()[:2]
    assert header.startswith("time,") and first.split(",")[0] == "0.0"


def test_limits_suite_report(tmp_path):
    text = open(os.path.join(SCENARIOS, "limits_suite.toml")).read()
    text = text.replace("n_points = 20", "n_points = 4").replace("mc_samples = 400000", "mc_samples = 100000")
    text = text.replace("points = 11", "points = 7")
    sc = parse_scenario_text(text, "limits-suite")
    assert run(sc, str(tmp_path)) == 0
    report = load(tmp_path / "limits_report.json")
    names = {c["name"] for c in report["checks"]}
    assert {"diosi_diagonal_coincidence", "pure_decoherence_limit", "maxwell_stationarity",
            "classical_boltzmann_diagonal", "out_rate_5d_vs_3d"} <= names
    for c in report["checks"]:
        assert {"passed", "measured", "tolerance"} <= set(c)
    assert report["all_passed"] == all(c["passed"] for c in report["checks"])


def test_qlbe_evolve_thermal_is_flat(tmp_path):
    sc = parse_scenario_text(QLBE_SMALL, "qlbe-evolve")
    assert run(sc, str(tmp_path)) == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    header = lines[0].split(",")
    col = header.index("kinetic_energy")
    ke = np.array([float(r.split(",")[col]) for r in lines[1:]])
    assert len(ke) == 21
    assert np.ptp(ke) < 1e-10 * ke[0]


def test_determinism_bit_identical(tmp_path):
    path = os.path.join(SCENARIOS, "montecore.toml")
    for name in ("a", "b"):
        assert run(parse_scenario(path, "montecore-check"), str(tmp_path / name)) in (0, 3)
    files = sorted(os.listdir(tmp_path / "a"))
    assert files == sorted(os.listdir(tmp_path / "b"))
    for f in files:
        if f != "run_manifest.json":
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_cli_validation_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(MINIMAL.replace("beta = 1.0", "beta = -1.0"))
    out = tmp_path / "out"
    assert main(["channel-rates", "--scenario", str(bad), "--out", str(out)]) == 2
    err = load(out / "error.json")
    assert err["code"] == "VALIDATION_ERROR" and err["exit_status"] == 2
    assert "gas.beta" in capsys.readouterr().err


def test_cli_io_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    good = tmp_path / "s.toml"
    good.write_text(MINIMAL)
    assert main(["channel-rates", "--scenario", str(good), "--out", str(blocker / "sub")]) == 4
    assert main(["channel-rates", "--scenario", str(tmp_path / "missing.toml"), "--out", str(tmp_path / "o")]) == 4


def test_cli_numerical_exit_code(tmp_path):
    sc = tmp_path / "s.toml"
    sc.write_text(QLBE_SMALL + "\n[quadrature]\nmax_refinements = 0\n")
    out = tmp_path / "out"
    assert main(["qlbe-rates", "--scenario", str(sc), "--out", str(out)]) == 3
    assert load(out / "error.json")["code"] == "NO_CONVERGENCE"


def test_cli_flags_override_file(tmp_path, monkeypatch):
    sc = tmp_path / "s.toml"
    sc.write_text("seed = 5\n" + MINIMAL)
    monkeypatch.setenv("COLLDECO_THREADS", "3")
    out = tmp_path / "a"
    assert main(["channel-rates", "--scenario", str(sc), "--out", str(out), "--seed", "9", "--tol", "1e-9"]) == 0
    manifest = load(out / "run_manifest.json")
    assert manifest["seed"] == 9 and manifest["threads"] == 3 and manifest["tol_override"] == 1e-9
    out = tmp_path / "b"
    assert main(["channel-rates", "--scenario", str(sc), "--out", str(out), "--threads", "2"]) == 0
    assert load(out / "run_manifest.json")["threads"] == 2


def test_cli_rejects_bad_tol(tmp_path):
    sc = tmp_path / "s.toml"
    sc.write_text(MINIMAL)
    assert main(["channel-rates", "--scenario", str(sc), "--out", str(tmp_path / "o"), "--tol", "0.5"]) == 2
