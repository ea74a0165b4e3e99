import json
import math

import pytest
from hypothesis import given, settings as hsettings, strategies as st

from modclock import cli
from modclock.errors import ConfigError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_parse_config():
    cfg = cli.parse_config("scenario = spin\nclock.d = 301  # inline comment\nspin.regime = resonant\n"
                           "tol.max_flip = 0.02\nhbar = 0.5\n")
    assert cfg.scenario == "spin" and cfg.clock_d == 301 and cfg.hbar == 0.5
    assert cfg.params == {"regime": "resonant"}
    assert cfg.tolerances == {"max_flip": 0.02}


@pytest.mark.parametrize("text", [
    "scenario = nope",
    "scenario = spin\npiston.delta_ell = 1",
    "scenario = spin\nclock.d = many",
    "scenario = spin\nhbar = -1",
    "[extra]\nscenario = spin",
    "scenario = spin\nhbar = nan",
])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        cli.parse_config(text)


def test_run_exit_codes(tmp_path):
    ok = write(tmp_path, "ok.cfg", "scenario = spin\nspin.regime = resonant\nspin.n_pulses = 20\n")
    assert cli.main(["run", ok, "--out", str(tmp_path / "o1")]) == 0
    summary = json.loads((tmp_path / "o1" / "summary.json").read_text())
    assert summary["status"] == "pass"
    assert {c["id"] for c in summary["checks"]} == {"max_flip", "norm", "rate_pulse_period", "rate_identity"}
    csv_lines = (tmp_path / "o1" / "spin_resonant.csv").read_text().splitlines()
    assert csv_lines[0] == "t,p_flip" and len(csv_lines) == 2002

    strict = write(tmp_path, "strict.cfg", "scenario = spin\nspin.regime = resonant\ntol.max_flip = 1e-9\n")
    assert cli.main(["run", strict, "--out", str(tmp_path / "o2")]) == 1
    assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 2
    bad = write(tmp_path, "bad.cfg", "scenario = spin\nspin.bogus = 1\n")
    assert cli.main(["run", bad, "--out", str(tmp_path / "o3")]) == 2
    assert cli.main(["run", ok, "--regime", "sideways", "--out", str(tmp_path / "o4")]) == 2
    assert cli.main(["frobnicate"]) == 2


def test_runtime_precondition_maps_to_config_exit(tmp_path):
    # clock.dt that does not divide the pulse period
    cfg = write(tmp_path, "dt.cfg", "scenario = spin\nclock.dt = 0.1\n")
    assert cli.main(["run", cfg, "--out", str(tmp_path / "o")]) == 2


def test_doubleslit_run_is_deterministic(tmp_path):
    cfg = write(tmp_path, "ds.cfg", "scenario = doubleslit\ndoubleslit.n = 128\ndoubleslit.length = 128\n"
                                    "doubleslit.ell = 16\ndoubleslit.sigma = 1\ndoubleslit.n_phi = 5\n")
    assert cli.main(["run", cfg, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", cfg, "--out", str(tmp_path / "b")]) == 0
    for name in ("doubleslit.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = (tmp_path / "a" / "doubleslit.csv").read_text().splitlines()
    assert len(rows) == 6


def test_sweep_layout(tmp_path):
    cfg = write(tmp_path, "sw.cfg", "scenario = spin\n")
    out = tmp_path / "sweep"
    code = cli.main(["sweep", cfg, "--param", "hbar", "--values", "1.0", "0.5", "--out", str(out), "--jobs", "2"])
    assert code == 0
    summary = json.loads((out / "sweep.json").read_text())
    assert [r["value"] for r in summary["runs"]] == ["1.0", "0.5"]
    assert (out / "hbar=0.5" / "summary.json").exists()
    # the flip curve does not depend on hbar when amplitudes are given as rotation angles
    a = (out / "hbar=1.0" / "spin_resonant.csv").read_text().splitlines()[-1].split(",")[1]
    b = (out / "hbar=0.5" / "spin_resonant.csv").read_text().splitlines()[-1].split(",")[1]
    assert math.isclose(float(a), float(b), rel_tol=1e-9)
    assert cli.main(["sweep", cfg, "--param", "piston.v0", "--values", "1", "--out", str(out)]) == 2


def test_verify_suites(tmp_path):
    assert cli.main(["verify", "--suite", "clock", "--d", "64", "--out", str(tmp_path)]) == 0
    body = json.loads((tmp_path / "verify.json").read_text())
    status = {c["id"]: c["status"] for c in body["checks"]}
    assert status["energy_time/seam"] == "flagged"
    assert status["time_flow"] == "pass"
    assert cli.main(["verify", "--suite", "nope", "--out", str(tmp_path)]) == 2
    assert cli.main(["verify", "--d", "4", "--out", str(tmp_path)]) == 2


@hsettings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=5))
def test_csv_floats_round_trip(values):
    text = cli.csv_text(["a"] * len(values), [values])
    parsed = [float(v) for v in text.splitlines()[1].split(",")]
    assert parsed == [float(v) for v in values]


@hsettings(max_examples=25, deadline=None)
@given(st.dictionaries(st.from_regex(r"[a-z]{1,8}\.txt", fullmatch=True), st.text(max_size=200), min_size=1, max_size=4))
def test_write_atomic_round_trip(tmp_path_factory, files):
    out = tmp_path_factory.mktemp("atomic")
    cli.write_atomic(files, out)
    for name, text in files.items():
        assert (out / name).read_bytes().decode("utf-8") == text
    assert not [p for p in out.iterdir() if p.name.endswith(".tmp")]
