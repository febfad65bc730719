import csv
import hashlib
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from bohmchaos import cli
from bohmchaos.config import ExperimentConfig, load


def write_cfg(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def small_lyapunov(name="ho3d_stat", n_steps=20):
    d = load(name).to_dict()
    d["lyapunov"] = {**d.get("lyapunov", {}), "n_steps": n_steps}
    return d


def ensemble_cfg(count=3):
    return {"name": "ens", "command": "ensemble", "seed": 5,
            "state": {"generator": "eq31", "params": {"alpha": "pi/4"}},
            "sampler": {"count": count}, "lyapunov": {"n_steps": 15}}


def test_trajectory_run_writes_csv_and_record(tmp_path, capsys):
    d = load("trajectory_ho3d_stat").to_dict()
    d["t_span"] = [0, 5]
    assert cli.main(["run", write_cfg(tmp_path, d), "--out", str(tmp_path / "o")]) == cli.EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    out = tmp_path / "o"
    header, rows = read_csv(out / "trajectory_ho3d_stat_trajectory.csv")
    assert header == ["t", "x1", "y1", "z1"] and len(rows) == 11
    rec = json.loads((out / "trajectory_ho3d_stat_run.json").read_text())
    assert rec["config"] == d and rec["statuses"] == ["Completed"]
    assert rec["results"]["max_energy_error"] < 1e-6
    assert rec["regularity"]["independent_count"] == 0
    assert summary["run_id"] == rec["run_id"] and len(rec["run_id"]) == 12
    assert not list(out.glob(".*.tmp"))


def test_manifest_lists_every_output_with_checksum(tmp_path):
    cfg = ExperimentConfig.from_dict(small_lyapunov())
    rec = cli.run(cfg, tmp_path)
    files = {p.name for p in tmp_path.iterdir()} - {f"{cfg.name}_run.json"}
    assert {o["file"] for o in rec.outputs} == files
    for o in rec.outputs:
        data = (tmp_path / o["file"]).read_bytes()
        assert o["bytes"] == len(data) and o["sha256"] == hashlib.sha256(data).hexdigest()


def test_lyapunov_csv_has_one_row_per_interval(tmp_path):
    rec = cli.run(ExperimentConfig.from_dict(small_lyapunov(n_steps=30)), tmp_path)
    header, rows = read_csv(tmp_path / "ho3d_stat_lyapunov.csv")
    assert header == ["T", "h"] and len(rows) == 30
    assert float(rows[-1][1]) == rec.results["final_h"]


def test_identical_runs_are_byte_identical_across_jobs(tmp_path):
    cfg = ExperimentConfig.from_dict(ensemble_cfg())
    cli.run(cfg, tmp_path / "a", jobs=1)
    cli.run(cfg, tmp_path / "b", jobs=2)
    a = (tmp_path / "a" / "ens_ensemble.csv").read_bytes()
    assert a == (tmp_path / "b" / "ens_ensemble.csv").read_bytes()
    header, rows = read_csv(tmp_path / "a" / "ens_ensemble.csv")
    assert len(rows) == 3


def test_seed_override_changes_samples(tmp_path):
    path = write_cfg(tmp_path, ensemble_cfg(count=2))
    assert cli.main(["run", path, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", path, "--out", str(tmp_path / "b"), "--seed", "6"]) == 0
    rec = json.loads((tmp_path / "b" / "ens_run.json").read_text())
    assert rec["seed"] == 6 and rec["config"]["seed"] == 6
    assert (tmp_path / "a" / "ens_ensemble.csv").read_bytes() != (tmp_path / "b" / "ens_ensemble.csv").read_bytes()


def test_jobs_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BOHM_JOBS", "2")
    assert cli.main(["run", write_cfg(tmp_path, ensemble_cfg(2)), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "ens_run.json").read_text())["jobs"] == 2
    monkeypatch.setenv("BOHM_JOBS", "zero")
    assert cli.main(["run", write_cfg(tmp_path, ensemble_cfg(2)), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_measures_grid_for_half_weight_family(tmp_path):
    cli.run(load("measures_eq100"), tmp_path)
    header, rows = read_csv(tmp_path / "measures_eq100_measures.csv")
    assert header == ["param", "PR", "Q", "EG", "tau3"]
    vals = np.array(rows, dtype=float)
    assert np.allclose(vals[:, 0], [0, 1 / 8, 1 / 4, 3 / 8, 1 / 2])
    assert np.allclose(vals[:, 3], 0.5, atol=1e-8)
    assert np.allclose(vals[:, 4], 0, atol=1e-14)


def test_sweep_rows_and_pr_symmetry(tmp_path):
    d = {"name": "sw", "command": "sweep", "seed": 2, "sampler": {"count": 2},
         "lyapunov": {"n_steps": 5},
         "sweep": {"generator": "eq32", "parameter": "alpha",
                   "grid": ["pi/8", "pi/4 - pi/16", "pi/4", "pi/4 + pi/16", "3*pi/8"]}}
    rec = cli.run(ExperimentConfig.from_dict(d), tmp_path)
    header, rows = read_csv(tmp_path / "sw_sweep.csv")
    assert header == ["param", "mean_h", "std_h", "excluded", "PR", "Q", "EG", "tau3"]
    pr = [float(r[4]) for r in rows]
    assert pr[0] == pytest.approx(pr[4], abs=1e-10) and pr[1] == pytest.approx(pr[3], abs=1e-10)
    assert all(r[5] == "" for r in rows)
    assert [p["status"] for p in rec.results["points"]] == ["Completed"] * 5


def test_sweep_continues_past_failed_points(tmp_path):
    d = {"name": "sw", "command": "sweep", "seed": 2, "sampler": {"count": 2},
         "lyapunov": {"n_steps": 5}, "integrator": {"min_abs2": 0.999},
         "sweep": {"generator": "eq31", "parameter": "alpha", "grid": [0.3, 0.5]}}
    rec = cli.run(ExperimentConfig.from_dict(d), tmp_path)
    header, rows = read_csv(tmp_path / "sw_sweep.csv")
    assert len(rows) == 2
    status = [p["status"] for p in rec.results["points"]]
    assert status[0] == "Completed" and status[1].startswith("Failed")
    assert rows[0][1] != "" and rows[1][1] == "nan" and rows[1][3] == "2"
    assert rows[1][4] != ""


def test_sweep_with_every_point_failed(tmp_path, monkeypatch):
    def excluded(*a, **k):
        raise cli.chaos.EnsembleError("all samples were excluded")

    monkeypatch.setattr(cli.chaos, "average_lyapunov", excluded)
    d = {"name": "sw", "command": "sweep", "seed": 2, "sampler": {"count": 2},
         "lyapunov": {"n_steps": 5},
         "sweep": {"generator": "eq31", "parameter": "alpha", "grid": [0.3, 0.5]}}
    with pytest.raises(cli.NumericalFailure):
        cli.run(ExperimentConfig.from_dict(d), tmp_path)
    rec = json.loads((tmp_path / "sw_run.json").read_text())
    assert all(p["status"].startswith("Failed") for p in rec["results"]["points"])
    assert len(read_csv(tmp_path / "sw_sweep.csv")[1]) == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    d = {"name": "n", "command": "trajectory", "state": load("cart_triple_2p").to_dict()["state"],
         "x0": load("cart_triple_2p").to_dict()["x0"], "t_span": [0, 100],
         "integrator": {"min_abs2": 0.9}}
    assert cli.main(["run", write_cfg(tmp_path, d), "--out", str(tmp_path)]) == cli.EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err
    rec = json.loads((tmp_path / "n_run.json").read_text())
    assert rec["statuses"][0] == "NodeEncounter"


def test_validation_error_exit_code_names_field(tmp_path, capsys):
    d = load("ho3d_stat").to_dict()
    d["state"]["terms"][2]["quantum_numbers"][0]["l"] = 2
    path = write_cfg(tmp_path, d)
    assert cli.main(["validate", path]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "state.terms[2].quantum_numbers[0]" in err
    assert cli.main(["run", path, "--out", str(tmp_path / "x")]) == cli.EXIT_CONFIG
    assert not (tmp_path / "x").exists()


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["run"], ["run", "no_such_config"],
                                  ["benchmark", "henon-heiles"], ["run", "ho3d_stat", "--jobs", "0"]])
def test_bad_arguments_exit_2(argv, capsys):
    assert cli.main(argv) == cli.EXIT_CONFIG


def test_validate_and_list(capsys):
    assert cli.main(["validate", "sweep_eq31_alpha"]) == 0
    assert "ok: sweep_eq31_alpha (sweep)" in capsys.readouterr().out
    assert cli.main(["list"]) == 0
    assert "ho3d_stat" in capsys.readouterr().out.split()


def test_benchmark_command(tmp_path, capsys):
    code = cli.main(["benchmark", "henon-heiles", "--energy", "0.125", "--y", "-0.2", "--steps", "50",
                     "--section", "200", "--out", str(tmp_path)])
    assert code == 0
    rec = json.loads((tmp_path / "henon_heiles_E0.125_run.json").read_text())
    assert rec["results"]["energy_drift_end"] < 1e-10
    assert rec["results"]["crossings"] > 0
    header, rows = read_csv(tmp_path / "henon_heiles_E0.125_lyapunov.csv")
    assert len(rows) == 50
    assert cli.main(["benchmark", "henon-heiles", "--energy", "0.2"]) == cli.EXIT_CONFIG


def test_poincare_command(tmp_path):
    d = load("section_polar_pair_2p").to_dict()
    d["section"]["t_max"] = 50
    rec = cli.run(ExperimentConfig.from_dict(d), tmp_path)
    header, rows = read_csv(tmp_path / f"{d['name']}_section.csv")
    assert header[0] == "t" and header[-1] == "direction"
    assert len(rows) == rec.results["crossings"]


def test_atomic_write_leaves_no_partial_file(tmp_path, monkeypatch):
    target = tmp_path / "f.csv"
    target.write_bytes(b"old\n")

    def boom(*a):
        raise OSError("disk full")

    monkeypatch.setattr(cli.os, "replace", boom)
    with pytest.raises(OSError):
        cli.atomic_write(target, b"new\n")
    assert target.read_bytes() == b"old\n"
    assert [p.name for p in tmp_path.iterdir()] == ["f.csv"]


def test_csv_formatting():
    data = cli.csv_bytes(["a", "b"], [[0.1, None], [math.pi, 2]])
    lines = data.decode().splitlines()
    assert lines[0] == "a,b" and lines[1].endswith(",")
    assert float(lines[1].split(",")[0]) == 0.1
    assert [float(v) for v in lines[2].split(",")] == [math.pi, 2.0]


def test_console_script_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "bohmchaos.cli", "list"], capture_output=True, text=True)
    assert out.returncode == 0 and "box_2p" in out.stdout
