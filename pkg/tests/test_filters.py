import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from jdqml.errors import InvalidParameterError
from jdqml.filters import (
    Threshold,
    ThresholdSet,
    balance_diagnostics,
    classify,
    classify_norms,
    cutoff,
    write_classification_csv,
)
from jdqml.simulate import PathConfig, simulate_levy_ou

from conftest import make_path


@pytest.mark.parametrize(
    "D,rho,h,expected",
    [(1.0, 0.3, 0.01, 0.251188643150958), (1.0, 0.17, 1.0, 1.0), (2.0, 0.25, 1e-4, 0.2)],
)
def test_cutoff(D, rho, h, expected):
    assert cutoff(Threshold(rho, D), h) == pytest.approx(expected, rel=1e-12)


def test_cutoff_needs_positive_h():
    with pytest.raises(InvalidParameterError):
        cutoff(Threshold(0.3), 0.0)


@pytest.mark.parametrize("rho,D", [(0.5, 1.0), (0.0, 1.0), (-0.1, 1.0), (0.3, 0.0), (0.3, -2.0)])
def test_threshold_validation(rho, D):
    with pytest.raises(InvalidParameterError):
        Threshold(rho, D)


def test_classify_example():
    p = make_path(np.cumsum([0.0, 0.1, -0.05, 3.0]), 0.01)
    c = classify(p, Threshold(0.3))
    assert c.small_mask.tolist() == [True, True, False]
    assert (c.n_small, c.n_large) == (2, 1)


def test_all_zero_increments_are_small():
    c = classify(make_path(np.zeros(6), 0.01), Threshold(0.4))
    assert c.n_small == 5 and c.n_large == 0


def test_tie_is_small():
    cut = 0.01 ** 0.3
    c = classify_norms(np.array([cut, np.nextafter(cut, 1.0)]), cut)
    assert c.small_mask.tolist() == [True, False]


def test_euclidean_norm_in_two_dimensions():
    p = make_path([[0.0, 0.0], [0.3, 0.4], [0.3, 0.4]], 1.0)
    c = classify(p, Threshold(0.25, D=0.5))  # cutoff 0.5
    assert c.small_mask.tolist() == [True, True]
    c = classify(p, Threshold(0.25, D=0.49))
    assert c.small_mask.tolist() == [False, True]


@given(arrays(np.float64, st.integers(1, 200), elements=st.floats(-5, 5)), st.floats(0.01, 0.49))
def test_partition(increments, rho):
    p = make_path(np.concatenate(([0.0], np.cumsum(increments))), 0.01)
    c = classify(p, Threshold(rho))
    assert np.all(c.small_mask ^ c.large_mask)
    assert c.n_small + c.n_large == increments.size


@given(arrays(np.float64, 50, elements=st.floats(-2, 2)), st.floats(0.01, 0.48), st.floats(0.001, 0.01))
def test_monotone_in_rho(increments, rho, d_rho):
    p = make_path(np.concatenate(([0.0], np.cumsum(increments))), 0.01)
    assert classify(p, Threshold(rho + d_rho)).n_small <= classify(p, Threshold(rho)).n_small


def test_mask_read_only():
    c = classify(make_path([0.0, 1.0], 0.1), Threshold(0.2))
    with pytest.raises(ValueError):
        c.small_mask[0] = False


def test_threshold_set_defaults():
    ts = ThresholdSet.from_rhos(0.285, 0.26, 0.255)
    assert ts.th1_bar == ts.th3 and ts.th2_bar == ts.th2
    assert ThresholdSet.uniform(0.27).as_tuple() == (Threshold(0.27),) * 5


def test_misclassification_vanishes_as_h_shrinks(levy, theta0):
    rates = []
    for h in (1e-2, 1e-3, 1e-4):
        p = simulate_levy_ou(theta0, PathConfig(n=100_000, h=h, seed=4))
        c = classify(p, Threshold(0.26))
        no_jump = p.jump_marks == 0
        rates.append(np.mean(c.large_mask[no_jump]))
    assert rates[0] > rates[1] > rates[2]
    assert rates[2] < 1e-3


def test_balance_reference_design():
    n = 10**6
    h = n ** (-2 / 3)
    rep = balance_diagnostics(n, h, [Threshold(0.285), Threshold(0.26), Threshold(0.255)], delta=0.51)
    assert rep.nh == pytest.approx(100.0, rel=1e-12)
    assert rep.slots["rho1"]["admissible"]
    assert rep.slots["rho1"]["lower"] == pytest.approx(1.51 / 6)
    assert rep.nh_1_delta < 1 and rep.rate_exponent < 0
    assert rep.all_admissible


def test_balance_rejects_half_and_never_raises():
    rep = balance_diagnostics(100, 0.1, [0.5, 0.26, 0.2], delta=0.5)
    assert not rep.slots["rho1"]["admissible"]
    assert rep.slots["rho3"]["admissible"]
    rep = balance_diagnostics(100, 0.1, [0.2, 0.2, 0.2], delta=0.0)
    assert not rep.slots["rho1"]["admissible"]  # 1/5 is an open end


def test_classification_csv(tmp_path):
    p = make_path(np.cumsum([0.0, 0.1, -0.05, 3.0]), 0.01)
    target = tmp_path / "c.csv"
    write_classification_csv(p, [Threshold(0.3), Threshold(0.45)], target)
    lines = target.read_text().splitlines()
    assert lines[0] == "i,abs_dx,small_rho0.3_D1,small_rho0.45_D1"
    assert [ln.split(",")[2] for ln in lines[1:]] == ["1", "1", "0"]
    assert len(lines) == 4 and math.isclose(float(lines[3].split(",")[1]), 3.0)
