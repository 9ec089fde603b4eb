import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from lwelab import cli, harness
from lwelab.errors import NumericalFailure
from lwelab.gkp import LatticeCode, concatenated_error_rate
from lwelab.harness import ExperimentConfig, format_real, manifest_path, sweep
from lwelab.lwe import InstanceSet, secret_sidecar_path
from lwelab.quantum import sample_complexity_sweep
from lwelab.ring import make_gaussian


def lab(tmp_path, *args):
    return cli.main([str(a) for a in args])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_format_real_round_trip():
    rng = np.random.default_rng(0)
    for x in rng.normal(size=200) * 10.0 ** rng.integers(-300, 300, size=200):
        assert float(format_real(float(x))) == x
    assert format_real(3) == "3" and format_real(True) == "1"


def test_atomic_write_leaves_no_temp(tmp_path):
    target = tmp_path / "sub" / "x.txt"
    harness.atomic_write_text(target, "hello")
    harness.atomic_write_text(target, "again")
    assert target.read_text() == "again"
    assert [p.name for p in target.parent.iterdir()] == ["x.txt"]


def test_gen_byte_identical(tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        assert lab(tmp_path, "gen", "--n", 2, "--q", 5, "--sigma", 1.0, "--m", 10, "--seed", 7, "--out", out) == 0
        outs.append(out)
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert secret_sidecar_path(outs[0]).read_bytes() == secret_sidecar_path(outs[1]).read_bytes()
    inst = InstanceSet.load(outs[0])
    assert inst.m == 10 and inst.key is not None
    assert np.array_equal((inst.a @ inst.key.to_array() + inst.errors) % 5, inst.b)
    public = json.loads(outs[0].read_text())
    assert "errors" not in json.dumps(public) and "secret" not in json.dumps(public)


def test_manifest_names_seed(tmp_path):
    out = tmp_path / "g.json"
    lab(tmp_path, "gen", "--seed", 123, "--out", out)
    man = json.loads(manifest_path(out).read_text())
    assert man["seed"] == 123 and man["config"]["seed"] == 123
    assert man["version"] and man["duration_s"] >= 0
    assert str(out) in man["outputs"]
    # The echoed config regenerates the run.
    cfg = dict(man["config"], out=str(tmp_path / "again.json"))
    cfg["m_list"] = tuple(cfg["m_list"])
    harness.run(ExperimentConfig(**cfg))
    assert (tmp_path / "again.json").read_bytes() == out.read_bytes()


def test_attack_quantum_zero_noise(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert lab(tmp_path, "attack-quantum", "--n", 2, "--q", 5, "--sigma", 1e-6, "--trials", 100,
               "--seed", 1, "--out", out) == 0
    man = json.loads(manifest_path(out).read_text())
    assert man["summary"] == {"trials": 100, "successes": 100}
    rows = read_csv(out)
    assert len(rows) == 100 and all(r["success"] == "1" for r in rows)
    for r in rows:
        ys = r["measured_y_sequence"].split(";")
        assert len(ys) == int(r["samples_consumed"])
        assert ys[-1] != "0" and all(y == "0" for y in ys[:-1])


def test_attack_quantum_dump_state(tmp_path):
    out, dump = tmp_path / "r.csv", tmp_path / "state.csv"
    assert lab(tmp_path, "attack-quantum", "--n", 1, "--q", 3, "--trials", 2, "--out", out,
               "--dump-state", dump) == 0
    rows = read_csv(dump)
    assert len(rows) == 9
    amps = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    assert np.sum(np.abs(amps) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_attack_classical(tmp_path):
    out = tmp_path / "c.csv"
    assert lab(tmp_path, "attack-classical", "--n", 2, "--q", 5, "--sigma", 0.3, "--m", 20,
               "--trials", 20, "--out", out) == 0
    rows = read_csv(out)
    assert [r["trial"] for r in rows] == [str(i) for i in range(20)]
    assert sum(int(r["success"]) for r in rows) >= 18


def test_bounds_fano_satisfied(tmp_path):
    out = tmp_path / "b.json"
    assert lab(tmp_path, "bounds", "--n", 1, "--q", 3, "--sigma", 0.5, "--m", 2, "--out", out) == 0
    res = json.loads(out.read_text())
    fano = [r for r in res["reports"] if r["quantity_name"] == "fano"]
    assert len(fano) == 1 and fano[0]["satisfied"] is True
    assert all(r["satisfied"] for r in res["reports"])
    assert abs(res["capacity_bits"] - res["capacity_numerical_bits"]) < 1e-6


def test_gkp_csv(tmp_path):
    out = tmp_path / "g.csv"
    assert lab(tmp_path, "gkp", "--q", 7, "--sigma", 1.0, "--m-list", "1,3,5", "--trials", 20000,
               "--out", out) == 0
    rows = read_csv(out)
    assert [r["m"] for r in rows] == ["1", "3", "5"]
    chi, code = make_gaussian(1.0, 7), LatticeCode(7)
    for r in rows:
        assert float(r["exact_rate"]) == concatenated_error_rate(code, chi, int(r["m"]))
        assert abs(float(r["monte_carlo_rate"]) - float(r["exact_rate"])) <= 4 * float(r["stderr"]) + 1e-12


@pytest.mark.parametrize("args,field", [
    (["gen", "--q", "1"], "q"),
    (["gen", "--sigma", "-1"], "sigma"),
    (["gen", "--seed", "-3"], "seed"),
    (["attack-quantum", "--q", "9"], "q"),
    (["gkp", "--m-list", "1,2"], "m_list"),
    (["sweep", "capacity", "--sigma", "0.5,1", "--q", "3,5"], "q,sigma"),
    (["sweep", "capacity"], None),
    (["attack-quantum", "--radius", "4", "--q", "5"], "radius"),
])
def test_usage_errors(tmp_path, capsys, args, field):
    code = cli.main(args + ["--out", str(tmp_path / "x")])
    assert code == 2
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["error"] == "usage_error"
    assert rec.get("field") == field
    assert not (tmp_path / "x").exists()


def test_capacity_error(tmp_path, capsys):
    assert cli.main(["attack-quantum", "--n", "6", "--q", "17", "--out", str(tmp_path / "x")]) == 3
    assert cli.main(["attack-classical", "--n", "9", "--q", "11", "--out", str(tmp_path / "x")]) == 3
    assert cli.main(["bounds", "--n", "2", "--q", "7", "--m", "3", "--out", str(tmp_path / "x")]) == 3
    assert not (tmp_path / "x").exists()


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    def boom(cfg):
        raise NumericalFailure("did not converge", trace=[0.1, 0.01])

    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["bounds", "--out", str(tmp_path / "x")]) == 4
    assert json.loads(capsys.readouterr().err)["error"] == "numerical_failure"


def test_sweep_gkp_matches_direct(tmp_path):
    out = tmp_path / "s.csv"
    assert lab(tmp_path, "sweep", "gkp", "--q", 7, "--sigma", 1.0, "--m", "1,3,5,7,9",
               "--trials", 5000, "--out", out) == 0
    rows = read_csv(out)
    chi, code = make_gaussian(1.0, 7), LatticeCode(7)
    assert [int(r["m"]) for r in rows] == [1, 3, 5, 7, 9]
    assert [int(r["index"]) for r in rows] == list(range(5))
    for r in rows:
        assert float(r["exact_rate"]) == concatenated_error_rate(code, chi, int(r["m"]))


def test_sweep_complexity_matches_direct():
    cfg = ExperimentConfig("sweep", target="complexity", n=(1, 2), q=5, sigma=0.8, eta=0.1,
                           trials=60, seed=11, max_samples=32, confirm=30)
    rows = sweep(cfg)
    direct = sample_complexity_sweep([1, 2], 0.1, make_gaussian(0.8, 5), 11, 60, 32, 30)
    assert [{k: v for k, v in r.items() if k != "index"} for r in rows] == direct


def test_sweep_quantum_success_sigma(tmp_path):
    out = tmp_path / "q.csv"
    assert lab(tmp_path, "sweep", "quantum-success", "--n", 1, "--q", 5, "--sigma", "0.25,0.5,1,2,4",
               "--trials", 3000, "--out", out) == 0
    rows = read_csv(out)
    pred = [float(r["predicted"]) for r in rows]
    assert all(b <= a + 1e-15 for a, b in zip(pred, pred[1:]))
    for r in rows:
        assert abs(float(r["empirical_success"]) - float(r["predicted_observed"])) <= 4 * float(r["stderr"]) + 1e-12


def test_sweep_jobs_invariant(tmp_path):
    paths = []
    for jobs in (1, 3):
        out = tmp_path / f"s{jobs}.csv"
        assert lab(tmp_path, "sweep", "quantum-success", "--n", 1, "--q", 5, "--sigma", "0.5,1,2",
                   "--trials", 500, "--jobs", jobs, "--out", out) == 0
        paths.append(out)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_lab_jobs_env_default(monkeypatch):
    monkeypatch.setenv("LAB_JOBS", "5")
    args = cli.build_parser().parse_args(["sweep", "capacity", "--sigma", "1,2"])
    assert args.jobs == 5


def test_json_format(tmp_path):
    out = tmp_path / "s.json"
    assert lab(tmp_path, "sweep", "capacity", "--q", 5, "--sigma", "0.5,1,2", "--format", "json",
               "--out", out) == 0
    rows = json.loads(out.read_text())
    assert [r["sigma"] for r in rows] == [0.5, 1.0, 2.0]
    assert all(abs(r["closed_form"] - r["numerical"]) < 1e-6 for r in rows)


def test_console_script_help():
    env = dict(os.environ)
    res = subprocess.run([sys.executable, "-m", "lwelab.cli", "gkp", "--help"], capture_output=True,
                         text=True, env=env)
    assert res.returncode == 0 and "--m-list" in res.stdout
