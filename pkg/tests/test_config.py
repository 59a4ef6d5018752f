import math

import pytest

from jdqml.config import load_config, parse_config
from jdqml.errors import ConfigError

FULL = """
model = "levy_ou"
[params]
alpha = 2.0
beta = 2.5
lambda = 6.0
mu = 0.0
sigma2 = 20.25
[bounds]
alpha = [0.01, 50.0]
[thresholds]
rho1 = 0.285
rho2 = 0.26
rho3 = 0.255
[sampling]
n = 1000
h_exponent = 0.6666666666666666
seed = 7
[test]
fix = { alpha = 2.0 }
[study]
kind = "test"
reps = 3
[study.grid]
"rho1_bar" = [0.255, 0.26]
"rho2_bar" = [0.255, 0.26, 0.265]
[output]
dir = "results"
"""


def write(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def test_full_config(tmp_path):
    cfg = load_config(write(tmp_path, FULL))
    assert cfg.theta().flat.tolist() == [2.0, 2.5, 6.0, 0.0, 20.25]
    assert cfg.step() == pytest.approx(1000 ** (-2 / 3), rel=1e-15)
    assert cfg.constraints() == {0: 2.0}
    assert cfg.param_bounds().lower[0] == 0.01
    cells = cfg.grid_cells()
    assert len(cells) == 6
    assert [(c.th1_bar.rho, c.th2_bar.rho) for c in cells[:3]] == [(0.255, 0.255), (0.255, 0.26), (0.255, 0.265)]
    assert all(c.th1.rho == 0.285 and c.th3.rho == 0.255 for c in cells)
    assert cfg.out_dir == "results" and cfg.study_kind == "test" and cfg.reps == 3


def test_bar_thresholds_default_to_estimation_thresholds():
    th = parse_config({"thresholds": {"rho1": 0.285, "rho2": 0.26, "rho3": 0.255}}).thresholds()
    assert th.th1_bar.rho == 0.255 and th.th2_bar.rho == 0.26


def test_tied_grid_axis():
    cfg = parse_config({"study": {"grid": {"rho1, rho2,rho3": [0.255, 0.3]}}})
    cells = cfg.grid_cells()
    assert [(c.th1.rho, c.th2.rho, c.th3.rho) for c in cells] == [(0.255,) * 3, (0.3,) * 3]


@pytest.mark.parametrize(
    "doc",
    [
        {"colour": 1},
        {"params": {"gamma": 1.0}},
        {"sampling": {"steps": 10}},
        {"sampling": {"h": 0.1, "h_exponent": 0.5}},
        {"sampling": {"n": 10.5}},
        {"sampling": {"n": True}},
        {"params": {"alpha": math.inf}},
        {"study": {"kind": "bootstrap"}},
        {"study": {"grid": {"rho4": [0.3]}}},
        {"study": {"grid": {"rho1": [0.3], "rho1,rho2": [0.3]}}},
        {"study": {"grid": {"rho1": []}}},
        {"test": {"fix": {"alpha": 2.0, "kappa": 1.0}}},
        {"bounds": {"alpha": [1.0]}},
        {"model": "heston"},
    ],
)
def test_rejects_bad_documents(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_missing_pieces_are_reported():
    cfg = parse_config({})
    with pytest.raises(ConfigError, match="missing"):
        cfg.theta()
    with pytest.raises(ConfigError, match="n is required"):
        cfg.step()
    with pytest.raises(ConfigError, match="rho1"):
        cfg.thresholds()
    assert cfg.thresholds(rho1=0.3, rho2=0.3, rho3=0.3).th1.rho == 0.3


def test_missing_file_names_path(tmp_path):
    target = tmp_path / "absent.toml"
    with pytest.raises(ConfigError, match="absent.toml"):
        load_config(target)


def test_malformed_toml(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "[params\nalpha = 1"))
