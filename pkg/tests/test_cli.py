import json

import numpy as np
import pytest

from jdqml.cli import main

BASE = """
[params]
alpha = 2.0
beta = 2.5
lambda = {lam}
mu = 0.0
sigma2 = 20.25
[thresholds]
rho1 = 0.285
rho2 = 0.26
rho3 = 0.255
[sampling]
n = {n}
h_exponent = 0.6666666666666666
seed = 11
[output]
dir = "{out}"
"""


@pytest.fixture
def config(tmp_path):
    def make(extra="", lam=6.0, n=5000):
        path = tmp_path / "run.toml"
        path.write_text(BASE.format(lam=lam, n=n, out=tmp_path / "out") + extra)
        return str(path)

    return make


@pytest.fixture
def path_csv(tmp_path, config):
    target = tmp_path / "path.csv"
    assert main(["simulate", "-c", config(), "-o", str(target)]) == 0
    return str(target)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_simulate_is_reproducible(tmp_path, config, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "-c", config(), "-o", str(a)]) == 0
    assert main(["simulate", "-c", config(), "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    manifest = read_json(str(a) + ".manifest.json")
    assert manifest["seed"] == 11 and manifest["n"] == 5000
    assert main(["simulate", "-c", config(), "-o", str(b), "--seed", "12"]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_simulate_without_jumps(tmp_path, config):
    target = tmp_path / "p.csv"
    assert main(["simulate", "-c", config(lam=0.0), "-o", str(target)]) == 0
    data = np.loadtxt(target, delimiter=",", skiprows=1)
    assert data.shape == (5001, 3)
    assert np.all(data[:, 2] == 0)


def test_missing_config_exits_2(tmp_path, capsys):
    missing = str(tmp_path / "nope.toml")
    assert main(["simulate", "-c", missing]) == 2
    assert missing in capsys.readouterr().err


def test_estimate_reports_thresholds(tmp_path, config, path_csv, capsys):
    out = tmp_path / "est.json"
    assert main(["estimate", path_csv, "-c", config(), "-o", str(out), "--rho1", "0.28"]) == 0
    doc = read_json(out)
    th = doc["thresholds"]
    assert th["rho1"]["rho"] == 0.28 and th["rho2"]["rho"] == 0.26 and th["rho3"]["rho"] == 0.255
    assert set(doc["theta_hat"]) == {"alpha", "beta", "lambda", "mu", "sigma2"}
    assert json.loads(capsys.readouterr().out)["theta_hat"] == doc["theta_hat"]


def test_joint_agrees_with_adaptive_off_alpha(tmp_path, config, path_csv):
    a, j = tmp_path / "a.json", tmp_path / "j.json"
    assert main(["estimate", path_csv, "-c", config(), "-o", str(a)]) == 0
    assert main(["estimate", path_csv, "-c", config(), "-o", str(j), "--joint"]) == 0
    ta, tj = read_json(a)["theta_hat"], read_json(j)["theta_hat"]
    for name in ("beta", "lambda", "mu", "sigma2"):
        assert tj[name] == pytest.approx(ta[name], rel=1e-6, abs=1e-9)


def test_default_output_location(tmp_path, config, path_csv):
    assert main(["estimate", path_csv, "-c", config()]) == 0
    assert (tmp_path / "out" / "estimate.json").exists()


def test_malformed_csv_names_line(tmp_path, config, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,x,jumps\n0,1.0,0\n0.01,oops,0\n")
    assert main(["estimate", str(bad), "-c", config()]) == 2
    assert "line 3" in capsys.readouterr().err


def test_missing_path_file(tmp_path, config, capsys):
    assert main(["estimate", str(tmp_path / "none.csv"), "-c", config()]) == 2
    assert "none.csv" in capsys.readouterr().err


def test_test_requires_constraints(config, path_csv, capsys):
    assert main(["test", path_csv, "-c", config()]) == 2
    assert "constraints" in capsys.readouterr().err


def test_test_at_fitted_values_gives_zero(tmp_path, config, path_csv):
    est = tmp_path / "est.json"
    assert main(["estimate", path_csv, "-c", config(), "-o", str(est)]) == 0
    fitted = read_json(est)["theta_hat"]
    fix = ", ".join(f"{k} = {v!r}" for k, v in fitted.items())
    out = tmp_path / "test.json"
    assert main(["test", path_csv, "-c", config(f"[test]\nfix = {{ {fix} }}\n"), "-o", str(out)]) == 0
    doc = read_json(out)
    assert abs(doc["lambda_n"]) < 1e-8 and doc["reject"] is False and doc["df"] == 5
    assert doc["critical_value"] == pytest.approx(11.0705, abs=1e-3)


def test_test_with_unknown_parameter_exits_2(config, path_csv):
    assert main(["test", path_csv, "-c", config("[test]\nfix = { kappa = 1.0 }\n")]) == 2


def test_study_single_rep(tmp_path, config):
    extra = '[study]\nreps = 1\n[study.grid]\n"rho1,rho2,rho3" = [0.255, 0.26]\n'
    out = tmp_path / "study"
    assert main(["study", "-c", config(extra), "-o", str(out)]) == 0
    lines = (out / "means.csv").read_text().splitlines()
    assert len(lines) == 3
    assert not list(out.glob(".tmp-*"))


def test_study_table1_grid(tmp_path, config):
    grid = ", ".join(f"{0.255 + 0.005 * k:.3f}" for k in range(10))
    extra = f'[study]\nreps = 1\n[study.grid]\n"rho1,rho2,rho3" = [{grid}]\n'
    out = tmp_path / "t1"
    assert main(["study", "-c", config(extra, n=3000), "-o", str(out), "--parallel", "2"]) == 0
    assert len((out / "means.csv").read_text().splitlines()) == 11
    assert len(read_json(out / "manifest.json")["cells"]) == 10


def test_test_study(tmp_path, config):
    extra = ('[test]\nfix = { alpha = 2.0, beta = 2.5, lambda = 6.0, mu = 0.0, sigma2 = 20.25 }\n'
             '[study]\nkind = "test"\nreps = 2\n[study.grid]\nrho1_bar = [0.255, 0.26]\n')
    out = tmp_path / "ts"
    assert main(["study", "-c", config(extra), "-o", str(out)]) == 0
    lines = (out / "rejections.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("rho1_bar\\rho2_bar")


def test_study_counts_failures(tmp_path, config):
    extra = '[study]\nreps = 2\n'
    out = tmp_path / "fail"
    cfg = config(extra)
    text = open(cfg).read().replace("[thresholds]", "[thresholds]\nD = 1e6")
    open(cfg, "w").write(text)
    assert main(["study", "-c", cfg, "-o", str(out)]) == 1
    assert "2" == (out / "means.csv").read_text().splitlines()[1].split(",")[-1]


def test_no_partial_files_after_error(tmp_path, config):
    target = tmp_path / "never.csv"
    assert main(["simulate", "-c", config(), "-o", str(target), "--h", "-0.5"]) == 2
    assert not target.exists() and not (tmp_path / "never.csv.tmp").exists()
