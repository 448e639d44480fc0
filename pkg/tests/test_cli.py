"""End-to-end tests for the batch experiment command line.

Every invocation goes through ``trapclock.cli.main`` in-process so exit
codes and emitted files can be checked directly; one test shells out to the
installed console script.  Determinism contracts (byte-identical reruns,
worker-count invariance) are asserted on raw file bytes.
"""

import csv
import hashlib
import json
import math
import subprocess

import numpy as np
import pytest

from trapclock import __version__
from trapclock.cli import main
from trapclock.clock import ScaleSet
from trapclock.env import EnvConfig
from trapclock.estimators import estimate_nu_t
from trapclock.limits import arcsine_cdf
from trapclock.stats import slope_and_se


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def by_traj(rows):
    out = {}
    for row in rows:
        out.setdefault(int(row[0]), []).append(row[1:])
    return out


def test_simulate_files_and_manifest(tmp_path):
    out = tmp_path / "sim"
    rc = main(["simulate", "--out", str(out), "--n", "500", "--n-traj", "2",
               "--t-max", "0.5"])
    assert rc == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["blocks.csv", "clocks.csv", "manifest.json",
                     "trajectories.csv"]

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["build"] == __version__
    cfg = manifest["config"]
    assert cfg["n"] == 500 and cfg["n_traj"] == 2 and cfg["t_max"] == 0.5
    assert cfg["master_seed"] == 1 and cfg["workers"] == 1
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest

    header, rows = read_csv(out / "trajectories.csv")
    assert header == ["traj", "event", "time", "holding", "x0", "x1"]
    assert manifest["totals"]["samples_or_events"] == len(rows)
    for traj, chunk in by_traj(rows).items():
        events = [int(r[0]) for r in chunk]
        assert events == list(range(len(chunk)))
        times = np.array([float(r[1]) for r in chunk])
        assert np.all(np.diff(times) > 0)
        assert all(float(r[2]) > 0 for r in chunk)
        sites = np.array([[int(r[3]), int(r[4])] for r in chunk])
        assert np.abs(sites[0]).sum() == 1  # first hop leaves the origin
        assert np.all(np.abs(np.diff(sites, axis=0)).sum(axis=1) == 1)

    header, rows = read_csv(out / "clocks.csv")
    assert header == ["traj", "breakpoint", "value"]
    for traj, chunk in by_traj(rows).items():
        bps = np.array([float(r[0]) for r in chunk])
        vals = np.array([float(r[1]) for r in chunk])
        assert bps[0] == 0.0 and vals[0] == 0.0
        assert np.all(np.diff(bps) > 0)
        # Clock values may plateau in float once a single hold dwarfs the
        # running total (increments below one ulp), so only nondecreasing.
        assert np.all(np.diff(vals) >= 0)

    header, rows = read_csv(out / "blocks.csv")
    assert header == ["traj", "k", "z"]
    chunks = by_traj(rows)
    assert set(chunks) == {0, 1}
    sizes = set()
    for traj, chunk in chunks.items():
        ks = [int(r[0]) for r in chunk]
        assert ks == list(range(len(chunk)))
        assert all(float(r[1]) >= 0 for r in chunk)
        sizes.add(len(chunk))
    assert len(sizes) == 1  # same block schedule for every trajectory


def test_simulate_rerun_is_byte_identical(tmp_path):
    args = ["--n", "500", "--n-traj", "2", "--t-max", "0.5",
            "--master-seed", "9"]
    assert main(["simulate", "--out", str(tmp_path / "a")] + args) == 0
    assert main(["simulate", "--out", str(tmp_path / "b")] + args) == 0
    for name in ("trajectories.csv", "clocks.csv", "blocks.csv"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()
    man_a = json.loads((tmp_path / "a" / "manifest.json").read_text())
    man_b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert man_a["files"] == man_b["files"]


def test_config_file_and_flag_precedence(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"n": 600, "t_max": 0.25}))
    out = tmp_path / "sim"
    rc = main(["simulate", "--out", str(out), "--config", str(cfg_path),
               "--n", "500"])
    assert rc == 0
    cfg = json.loads((out / "manifest.json").read_text())["config"]
    assert cfg["n"] == 500       # explicit flag beats the config file
    assert cfg["t_max"] == 0.25  # config file beats the built-in default
    assert cfg["d"] == 2         # untouched default


def test_conditions_grid_matches_library(tmp_path):
    out = tmp_path / "cond"
    rc = main(["conditions", "--out", str(out), "--n-list", "400",
               "--t-list", "1.0", "--u-list", "0.25,0.5,1.0",
               "--eps-list", "0.1", "--n-traj", "150", "--master-seed", "7"])
    assert rc == 0
    header, rows = read_csv(out / "conditions.csv")
    assert header == ["name", "n", "t", "u_or_eps", "value", "std_error",
                      "n_samples", "env_seed", "mode"]
    assert [r[0] for r in rows] == ["Nu_t", "Nu_t", "Nu_t", "A0_tail",
                                    "Sigma_t", "Sigma_t", "Sigma_t", "M_eps"]
    assert all(r[1] == "400" and r[2] == "1.0" and r[6] == "150" and
               r[7] == "7" and r[8] == "quenched" for r in rows)

    # The CSV must reproduce direct library calls bit for bit.
    env = EnvConfig(d=2, alpha=0.5, theta=0.0, env_seed=7, c_bar=1.0)
    scales = ScaleSet.for_lattice(400, 2, 0.5, gamma2=0.15,
                                  theta_policy="desk")
    u_list = [0.25, 0.5, 1.0]
    nus = estimate_nu_t(env, scales, 1.0, u_list, 150)
    for row, u, est in zip(rows[:3], u_list, nus):
        assert float(row[3]) == u
        assert float(row[4]) == est.value
        assert float(row[5]) == est.std_error

    slope_row = rows[3]
    slope, se = slope_and_se(np.log(u_list), np.log([e.value for e in nus]))
    assert slope_row[3] == ""
    assert float(slope_row[4]) == slope and float(slope_row[5]) == se
    assert slope < 0.0  # tail probabilities decay with the threshold

    eps_row = rows[7]
    assert float(eps_row[3]) == 0.1
    assert 0.0 <= float(eps_row[4])


def test_conditions_worker_invariance(tmp_path):
    args = ["--n-list", "400", "--t-list", "1.0", "--u-list", "0.25,0.5,1.0",
            "--n-traj", "100", "--with-sigma", "0", "--master-seed", "3"]
    assert main(["conditions", "--out", str(tmp_path / "w1"), "--workers",
                 "1"] + args) == 0
    assert main(["conditions", "--out", str(tmp_path / "w2"), "--workers",
                 "2"] + args) == 0
    assert (tmp_path / "w1" / "conditions.csv").read_bytes() == \
        (tmp_path / "w2" / "conditions.csv").read_bytes()


def test_overshoot_table(tmp_path):
    out = tmp_path / "over"
    rc = main(["overshoot", "--out", str(out), "--alpha-list", "0.5",
               "--rho-list", "1.0", "--n-paths", "4000"])
    assert rc == 0
    header, rows = read_csv(out / "overshoot.csv")
    assert header == ["alpha", "rho", "n_paths", "estimate", "std_error",
                      "arcsine_target", "mode"]
    assert len(rows) == 1
    row = rows[0]
    assert row[6] == "moment" and int(row[2]) == 4000
    p, se, target = float(row[3]), float(row[4]), float(row[5])
    assert target == arcsine_cdf(0.5, 0.5)
    assert np.isclose(se, math.sqrt(p * (1.0 - p) / 4000), rtol=1e-12)
    assert abs(p - target) <= 3.5 * se + 0.01


def test_aging_smoke_and_eps_column(tmp_path):
    out = tmp_path / "age"
    rc = main(["aging", "--out", str(out), "--s-list", "1000",
               "--rho-list", "1.0", "--n-env", "2", "--n-traj", "2"])
    assert rc == 0
    header, rows = read_csv(out / "aging.csv")
    assert header == ["kind", "s", "rho", "eps", "estimate", "std_error",
                      "arcsine_target", "n_env", "n_traj", "excluded"]
    assert [r[0] for r in rows] == ["C1", "C2", "C3"]
    for row in rows:
        assert row[3] == ""
        assert 0.0 <= float(row[4]) <= 1.0
        assert float(row[6]) == arcsine_cdf(0.5, 0.5)
        assert row[7] == "2" and row[8] == "2" and row[9] == "0"
    _, env_rows = read_csv(out / "aging_env.csv")
    assert len(env_rows) == 6  # three kinds x two environments
    seeds = {r[3] for r in env_rows}
    assert len(seeds) == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["totals"]["samples_or_events"] == 3 * 2 * 2

    out2 = tmp_path / "age_eps"
    rc = main(["aging", "--out", str(out2), "--s-list", "1000",
               "--rho-list", "1.0", "--n-env", "2", "--n-traj", "2",
               "--eps", "0.3"])
    assert rc == 0
    _, rows2 = read_csv(out2 / "aging.csv")
    assert [r[0] for r in rows2] == ["C1", "C2", "C3", "Ceps_batm"]
    assert rows2[3][3] == "0.3"


def test_aging_worker_and_rerun_invariance(tmp_path):
    args = ["--s-list", "1000", "--rho-list", "1.0", "--n-env", "3",
            "--n-traj", "3", "--master-seed", "5"]
    assert main(["aging", "--out", str(tmp_path / "w1"), "--workers", "1"]
                + args) == 0
    assert main(["aging", "--out", str(tmp_path / "w2"), "--workers", "2"]
                + args) == 0
    assert main(["aging", "--out", str(tmp_path / "w3"), "--workers", "1"]
                + args) == 0
    for name in ("aging.csv", "aging_env.csv"):
        blob = (tmp_path / "w1" / name).read_bytes()
        assert (tmp_path / "w2" / name).read_bytes() == blob
        assert (tmp_path / "w3" / name).read_bytes() == blob


def test_exit_codes(tmp_path):
    bad_key = tmp_path / "bad_key.json"
    bad_key.write_text('{"bogus": 1}')
    assert main(["simulate", "--out", str(tmp_path / "x1"), "--config",
                 str(bad_key)]) == 2

    assert main(["simulate", "--out", str(tmp_path / "x2"), "--config",
                 str(tmp_path / "missing.json")]) == 2

    bad_val = tmp_path / "bad_val.json"
    bad_val.write_text('{"n": "abc"}')
    assert main(["simulate", "--out", str(tmp_path / "x3"), "--config",
                 str(bad_val)]) == 2

    assert main(["simulate", "--out", str(tmp_path / "x4"), "--kind",
                 "Nope", "--n", "500"]) == 2

    # Every trajectory hits the event cap: runtime exit code 3, no manifest.
    out = tmp_path / "cap"
    rc = main(["aging", "--out", str(out), "--s-list", "1e9",
               "--rho-list", "1.0", "--n-env", "1", "--n-traj", "2",
               "--max-events", "2"])
    assert rc == 3
    assert not (out / "manifest.json").exists()

    with pytest.raises(SystemExit):
        main([])


def test_console_script_help():
    proc = subprocess.run(["trapclock", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0
    for name in ("simulate", "conditions", "overshoot", "aging"):
        assert name in proc.stdout
