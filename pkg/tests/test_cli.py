import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from aoipareto.cli import main
from aoipareto.oracle import brute_force_schedule
from aoipareto.scenario import Scenario


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def digest(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def make_scenario(tmp_path, name="s.json", seed=7, **overrides):
    cfg = tmp_path / f"{name}.cfg.json"
    cfg.write_text(json.dumps(overrides))
    out = tmp_path / name
    assert main(["scenario", "--config", str(cfg), "--seed", str(seed), "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def default_compare(tmp_path_factory):
    d = tmp_path_factory.mktemp("compare")
    cfg = d / "default.json"
    cfg.write_text("{}")
    sc = d / "s.json"
    assert main(["scenario", "--config", str(cfg), "--seed", "7", "--out", str(sc)]) == 0
    out = d / "cmp.csv"
    before = digest(sc)
    assert main(["compare", "--scenario", str(sc), "--out", str(out), "--runs", "200", "--seed", "1",
                 "--thetas", "1,2,4,8"]) == 0
    assert digest(sc) == before
    return sc, out


def test_default_scenario_has_five_base_stations(default_compare):
    sc, _ = default_compare
    s = Scenario.from_json(sc.read_text())
    assert s.bs_positions.shape == (5, 3) and s.stats.dims == (5, 8, 100)


def test_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["scenario", "--config", str(missing), "--seed", "1", "--out", str(tmp_path / "o.json")]) == 2
    assert str(missing) in capsys.readouterr().err


def test_invalid_override_names_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("{}")
    assert main(["scenario", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "o.json"), "--n-bs", "0"]) == 2
    assert "n_bs" in capsys.readouterr().err


def test_seed_is_mandatory(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{}")
    with pytest.raises(SystemExit) as exc:
        main(["scenario", "--config", str(cfg), "--out", str(tmp_path / "o.json")])
    assert exc.value.code == 2


def test_single_rb_frontier_one_row(tmp_path):
    sc = make_scenario(tmp_path, n_bs=2, n_rb_K=1, horizon_T=10)
    out = tmp_path / "f.csv"
    assert main(["frontier", "--scenario", str(sc), "--out", str(out)]) == 0
    r = rows(out)
    assert len(r) == 1 and r[0]["theta"] == "1" and r[0]["feasible"] == "1"


def test_frontier_rerun_byte_identical(tmp_path):
    sc = make_scenario(tmp_path, n_bs=2, n_rb_K=3, horizon_T=12)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["frontier", "--scenario", str(sc), "--out", str(a), "--json", str(tmp_path / "a.json")]) == 0
    assert main(["frontier", "--scenario", str(sc), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["replay", str(a) + ".manifest.json", "--verify"]) == 0


def test_tiny_frontier_matches_oracle(tmp_path):
    sc = make_scenario(tmp_path, n_bs=2, n_rb_K=2, horizon_T=4, tau_bar_slots=2, v_bar_bits=1e6)
    out = tmp_path / "f.csv"
    assert main(["frontier", "--scenario", str(sc), "--out", str(out)]) == 0
    s = Scenario.from_json(sc.read_text())
    c = s.config
    for r in rows(out):
        e_ref, _ = brute_force_schedule(s.stats, int(r["theta"]), c.tau_bar_slots, c.p_bar_w, c.v_bar_bits)
        if r["feasible"] == "1":
            assert abs(float(r["energy_watt_slots"]) - e_ref) <= 1e-4 * e_ref
        else:
            assert e_ref == np.inf


def test_wholly_infeasible_exit_code(tmp_path):
    sc = make_scenario(tmp_path, n_bs=1, n_rb_K=1, horizon_T=4, v_bar_bits=1e12)
    assert main(["frontier", "--scenario", str(sc), "--out", str(tmp_path / "f.csv")]) == 3


def test_missing_scenario_file(tmp_path):
    assert main(["frontier", "--scenario", str(tmp_path / "none.json"), "--out", str(tmp_path / "f.csv")]) == 2


def test_compare_rows_and_flags(default_compare):
    _, out = default_compare
    r = rows(out)
    assert list(r[0]) == ["scheme", "theta", "energy_dbm_slots", "rb_total", "aoi_success_rate", "runs", "seed", "feasible"]
    assert {(x["scheme"], x["theta"]) for x in r} == {
        (s, t) for s in ("proposed", "periodic", "instantaneous", "average") for t in ("1", "2", "4", "8")
    }


def _by(r):
    return {(x["scheme"], int(x["theta"])): x for x in r if x["feasible"] == "1"}


def test_compare_proposed_below_periodic(default_compare):
    d = _by(rows(default_compare[1]))
    for th in (1, 2, 4, 8):
        if ("proposed", th) in d and ("periodic", th) in d:
            assert float(d["proposed", th]["energy_dbm_slots"]) <= float(d["periodic", th]["energy_dbm_slots"]) + 1e-9


def test_compare_instantaneous_misses_some_deadlines(default_compare):
    d = _by(rows(default_compare[1]))
    rates = [float(v["aoi_success_rate"]) for (s, _), v in d.items() if s == "instantaneous"]
    assert rates and all(0.0 <= x < 1.0 for x in rates)


def test_compare_proposed_success_at_least_baselines(default_compare):
    d = _by(rows(default_compare[1]))
    for (scheme, th), v in d.items():
        if scheme != "proposed" and ("proposed", th) in d:
            assert float(d["proposed", th]["aoi_success_rate"]) >= float(v["aoi_success_rate"]), (scheme, th)


def test_console_script_version():
    out = subprocess.run([sys.executable, "-m", "aoipareto.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "aoipareto" in out.stdout
