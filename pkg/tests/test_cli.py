import csv
import json
import math
from pathlib import Path

import pytest
import yaml

from entrysim import atmosphere
from entrysim.cli import main
from entrysim.engine import COLUMNS

GOLDEN = Path(__file__).parent / "golden"

TRAJECTORY_HEADER = ("t_s,x_m,y_m,z_m,v_m_s,theta_rad,psi_rad,phase,u_cmd,u_applied,"
                     "mach,q_pa")
REPORT_KEYS = ["downrange", "impact_point", "impact_time", "miss_distance", "outcome",
               "peak_applied_load", "peak_dynamic_pressure", "phase_entry_times",
               "reference_comparison", "saturation_fraction"]
ENSEMBLE_KEYS = ["cep", "downrange_mean", "downrange_std", "impact_time_mean",
                 "impact_time_std", "miss_max", "miss_mean", "miss_min", "miss_std", "n",
                 "n_impact", "outcome_counts", "quantiles"]
RUNS_HEADER = ("run_index,seed,mass_kg,entry_gamma_deg,entry_altitude_m,density_multiplier,"
               "target_x_m,target_z_m,miss_m,impact_time_s,downrange_m,outcome")


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def no_nonfinite(text):
    lowered = text.lower()
    return "nan" not in lowered and "inf" not in lowered


def test_run_nominal(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "-o", str(out)]) == 0
    assert "outcome=impact" in capsys.readouterr().out
    traj = (out / "trajectory.csv").read_text()
    assert traj.splitlines()[0] == TRAJECTORY_HEADER
    assert tuple(TRAJECTORY_HEADER.split(",")) == COLUMNS
    report = json.loads((out / "report.json").read_text())
    assert sorted(report) == REPORT_KEYS
    assert report["outcome"] == "impact"
    assert no_nonfinite(traj) and no_nonfinite((out / "report.json").read_text())


def test_run_bad_dt(tmp_path, capsys):
    cfg = write(tmp_path, "scenario:\n  dt_s: -1\n")
    assert main(["run", cfg, "-o", str(tmp_path)]) == 2
    assert "dt" in capsys.readouterr().err


def test_run_timeout_override(tmp_path):
    assert main(["run", "-o", str(tmp_path), "--override", "max_time=1"]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["outcome"] == "timeout"
    rows = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert len(rows) == 1 + 101
    assert report["phase_entry_times"]["impact"] is None


def test_run_aborted_exit_code(tmp_path):
    cfg = write(tmp_path, "entry:\n  altitude_m: 5000\nvehicle:\n  cx0: 100000\n")
    assert main(["run", cfg, "-o", str(tmp_path)]) == 3
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["outcome"] == "aborted"


@pytest.mark.parametrize("text,needle", [
    ("scenario:\n  dtt_s: 1\n", "dtt_s"),
    ("weather:\n  wind: 3\n", "weather"),
    ("vehicle:\n  mass_kg: heavy\n", "mass_kg"),
    ("scenario:\n  seed: 1.5\n", "seed"),
    ("scenario:\n  mode: 2d\n", "mode"),
    ("entry:\n  gamma_deg: 20\n", "entry_gamma"),
    ("- a\n- b\n", "mapping"),
    ("scenario: [\n", "YAML"),
])
def test_config_errors_name_the_key(tmp_path, capsys, text, needle):
    assert main(["run", write(tmp_path, text), "-o", str(tmp_path)]) == 2
    assert needle in capsys.readouterr().err


@pytest.mark.parametrize("override", ["nope=1", "max_time", "seeker_noise_sigma=0"])
def test_bad_overrides(tmp_path, override):
    assert main(["run", "-o", str(tmp_path), "--override", override]) == 2


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "absent.yaml"), "-o", str(tmp_path)]) == 2


def test_degrees_in_config(tmp_path):
    cfg = write(tmp_path, "entry:\n  gamma_deg: 4.0\nscenario:\n  max_time_s: 0.02\n")
    assert main(["run", cfg, "-o", str(tmp_path)]) == 0
    with open(tmp_path / "trajectory.csv") as fh:
        first = next(csv.DictReader(fh))
    assert float(first["theta_rad"]) == -math.radians(4.0)


MC = "montecarlo:\n  n_runs: {n}\n  base_seed: 5\n"


def test_montecarlo_default_dispersions(tmp_path):
    cfg = write(tmp_path, MC.format(n=100))
    assert main(["montecarlo", cfg, "-o", str(tmp_path)]) == 0
    text = (tmp_path / "ensemble.json").read_text()
    stats = json.loads(text)
    assert sorted(stats) == ENSEMBLE_KEYS
    assert stats["n"] == 100 and math.isfinite(stats["cep"])
    rows = (tmp_path / "runs.csv").read_text().splitlines()
    assert rows[0] == RUNS_HEADER and len(rows) == 101
    assert no_nonfinite(text)


def test_montecarlo_byte_identical(tmp_path, monkeypatch):
    cfg = write(tmp_path, MC.format(n=8))
    assert main(["montecarlo", cfg, "-o", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("SIM_THREADS", "1")
    assert main(["montecarlo", cfg, "-o", str(tmp_path / "b")]) == 0
    for name in ("ensemble.json", "runs.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_montecarlo_zero_runs(tmp_path):
    assert main(["montecarlo", write(tmp_path, MC.format(n=0)), "-o", str(tmp_path)]) == 2


def test_montecarlo_needs_section(tmp_path, capsys):
    cfg = write(tmp_path, "scenario:\n  seed: 1\n")
    assert main(["montecarlo", cfg, "-o", str(tmp_path)]) == 2
    assert "montecarlo" in capsys.readouterr().err


def test_montecarlo_all_failed(tmp_path):
    cfg = write(tmp_path, MC.format(n=2) + "scenario:\n  max_time_s: 1\n")
    assert main(["montecarlo", cfg, "-o", str(tmp_path)]) == 3


def test_montecarlo_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SIM_THREADS", "zero")
    assert main(["montecarlo", write(tmp_path, MC.format(n=1)), "-o", str(tmp_path)]) == 2


def atmosphere_rows(capsys, *args):
    assert main(["atmosphere", *args]) == 0
    return list(csv.DictReader(capsys.readouterr().out.splitlines()))


def test_atmosphere_endpoints(capsys):
    rows = atmosphere_rows(capsys, "--from", "0", "--to", "1000", "--step", "1000")
    assert len(rows) == 2
    s = atmosphere.sample(0.0)
    r = rows[0]
    assert float(r["temperature_k"]) == s.temperature
    assert float(r["pressure_pa"]) == s.pressure
    assert float(r["density_kg_m3"]) == s.density
    assert float(r["speed_of_sound_m_s"]) == s.speed_of_sound


def test_atmosphere_density_monotone(capsys):
    rows = atmosphere_rows(capsys, "--from", "0", "--to", "86000", "--step", "1000")
    assert len(rows) == 87
    rho = [float(r["density_kg_m3"]) for r in rows]
    assert all(a >= b for a, b in zip(rho, rho[1:]))


def test_atmosphere_golden(capsys):
    assert main(["atmosphere", "--from", "0", "--to", "20000", "--step", "5000"]) == 0
    assert capsys.readouterr().out == (GOLDEN / "atmosphere_0_20000_5000.csv").read_text()


@pytest.mark.parametrize("args", [["--from", "10", "--to", "5"], ["--from", "-1", "--to", "5"],
                                  ["--step", "0"]])
def test_atmosphere_bad_range(args):
    assert main(["atmosphere", *args]) == 2


def test_schema_round_trips(tmp_path, capsys):
    assert main(["schema"]) == 0
    text = capsys.readouterr().out
    cfg = yaml.safe_load(text)
    assert set(cfg) == {"scenario", "entry", "vehicle", "guidance", "montecarlo"}
    assert cfg["scenario"]["dt_s"] == 0.01
    cfg["scenario"]["max_time_s"] = 0.5
    path = write(tmp_path, yaml.safe_dump(cfg))
    assert main(["run", path, "-o", str(tmp_path)]) == 0


def test_usage_error():
    assert main(["fly"]) == 2
