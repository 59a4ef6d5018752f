import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import gammaln

from jdqml.errors import InvalidParameterError
from jdqml.estimate import EstimationConfig, estimate_adaptive
from jdqml.filters import ThresholdSet
from jdqml.inference import (
    AsymptoticInfo,
    adaptive_qlr_test,
    asymptotic_covariance_levy_ou,
    chi2_cdf,
    chi2_quantile,
    chi2_sf,
    decide_test,
    estimate_mu2,
    levy_ou_mu2,
    qlr_statistic,
    standardize,
)
from jdqml.likelihood import QllContext, qll_joint
from jdqml.model import ModelSpec, ParamVector, levy_ou_model
from jdqml.simulate import PathConfig, simulate_levy_ou

import oracles
from conftest import CUT_TINY, H_TINY, X_TINY, make_path

LAYOUT = (1, 1, 3)


def pv(*values):
    return ParamVector.from_flat(values, LAYOUT)


def test_K_diag_reference_point(theta0):
    info = asymptotic_covariance_levy_ou(theta0, mu2=25.1)
    K = info.K_diag
    assert K[0] == pytest.approx(0.5)
    assert K[1] == pytest.approx(25.1 / 4)
    assert K[2] == pytest.approx(1 / 6)
    assert K[3] == pytest.approx(0.296296, abs=1e-6)
    assert K[4] == pytest.approx(0.0073159, abs=1e-7)
    assert np.all(info.variances == 1 / K)


def test_K_sqrt2_and_mu2_doubling(theta0):
    assert asymptotic_covariance_levy_ou(pv(math.sqrt(2), 1, 1, 0, 1), 1.0).K_diag[0] == pytest.approx(1.0)
    a = asymptotic_covariance_levy_ou(theta0, 3.0).K_diag
    b = asymptotic_covariance_levy_ou(theta0, 6.0).K_diag
    assert b[1] == 2 * a[1] and np.array_equal(np.delete(a, 1), np.delete(b, 1))


def test_K_requires_positive_inputs(theta0):
    with pytest.raises(InvalidParameterError):
        asymptotic_covariance_levy_ou(theta0, 0.0)


def test_mu2_closed_form(theta0):
    assert levy_ou_mu2(theta0) == pytest.approx((4 + 6 * 20.25) / 5.0)
    assert levy_ou_mu2(pv(1, 2, 3, 1, 1)) == pytest.approx((1 + 3 * 2) / 4 + (3 / 2) ** 2)


def test_estimate_mu2_examples():
    assert estimate_mu2(make_path(np.full(6, -1.5), 0.1)) == pytest.approx(2.25)
    assert estimate_mu2(make_path([1, -1, 1, -1], 0.1)) == 1.0


def test_estimate_mu2_long_run(theta0):
    ref = [estimate_mu2(simulate_levy_ou(theta0, PathConfig(n=400_000, h=0.01, seed=500 + k))) for k in range(10)]
    vals = [estimate_mu2(simulate_levy_ou(theta0, PathConfig(n=100_000, h=0.01, seed=900 + k))) for k in range(8)]
    se = lambda v: np.std(v, ddof=1) / math.sqrt(len(v))
    assert abs(np.mean(vals) - np.mean(ref)) <= 3 * math.hypot(se(vals), se(ref))
    assert np.mean(ref) == pytest.approx(levy_ou_mu2(theta0), rel=0.05)


def test_standardize(theta0):
    info = asymptotic_covariance_levy_ou(theta0, 25.1)
    assert np.all(standardize(theta0.flat, theta0, info, 10**6, 1e-4) == 0)
    unit = AsymptoticInfo(np.ones(5), 1.0)
    z = standardize(np.array([1.5, 0, 0, 0, 0]), pv(1, 0, 0, 0, 0), unit, 4, 0.25)
    assert z[0] == pytest.approx(1.0)
    z = standardize(np.array([1, 1, 0, 0, 0]), pv(1, 0, 0, 0, 0), unit, 4, 0.25)
    assert z[1] == pytest.approx(1.0)


def test_chi2_df2_closed_form():
    assert chi2_cdf(2 * math.log(2), 2) == pytest.approx(0.5, abs=1e-15)
    for x in (0.1, 1.0, 7.5, 30.0):
        assert chi2_cdf(x, 2) == pytest.approx(1 - math.exp(-x / 2), rel=1e-13)
    assert chi2_cdf(0.0, 3) == 0.0 and chi2_sf(0.0, 3) == 1.0


def _quantile_by_integration(eps, df):
    logc = -(df / 2) * math.log(2) - gammaln(df / 2)
    pdf = lambda x: math.exp(logc + (df / 2 - 1) * math.log(x) - x / 2) if x > 0 else 0.0
    lo, hi = 0.0, 200.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        tail, _ = quad(pdf, mid, np.inf, epsabs=1e-13, epsrel=1e-12)
        lo, hi = (mid, hi) if tail > eps else (lo, mid)
    return 0.5 * (lo + hi)


def test_quantile_oracles():
    assert chi2_quantile(0.05, 5) == pytest.approx(11.0705, abs=1e-3)
    assert chi2_quantile(0.05, 5) == pytest.approx(_quantile_by_integration(0.05, 5), abs=1e-8)
    assert chi2_quantile(0.05, 1) == pytest.approx(1.959963984540054**2, abs=1e-9)
    assert chi2_quantile(0.05, 1) == pytest.approx(3.8415, abs=1e-3)


@given(st.floats(0.0, 200.0), st.floats(0.0, 200.0), st.integers(1, 30))
def test_cdf_monotone_and_bounded(x, y, df):
    lo, hi = sorted((x, y))
    assert 0.0 <= chi2_cdf(lo, df) <= chi2_cdf(hi, df) <= 1.0


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 1 - 1e-6), st.integers(1, 20))
def test_quantile_cdf_round_trip(p, df):
    x = chi2_quantile(p, df)
    assert chi2_sf(x, df) == pytest.approx(p, abs=1e-8)


def test_quantile_domain():
    for eps in (0.0, 1.0, -0.1):
        with pytest.raises(InvalidParameterError):
            chi2_quantile(eps, 3)
    with pytest.raises(InvalidParameterError):
        chi2_cdf(1.0, 0)


def test_decide_test_examples():
    r = decide_test(0.0, 5, 0.05)
    assert r.p_value == 1.0 and not r.reject
    crit = chi2_quantile(0.05, 5)
    assert not decide_test(crit, 5, 0.05).reject
    assert decide_test(np.nextafter(crit, np.inf), 5, 0.05).reject
    r = decide_test(20.0, 5, 0.05)
    assert r.reject and r.critical_value == pytest.approx(11.0705, abs=1e-3)
    assert r.p_value == pytest.approx(1 - chi2_cdf(20.0, 5), abs=1e-15)
    with pytest.raises(InvalidParameterError):
        decide_test(1.0, 0)


def test_result_json():
    r = decide_test(3.0, 2, 0.1, thresholds=ThresholdSet.uniform(0.26), note="x")
    doc = json.loads(r.to_json())
    assert doc["df"] == 2 and doc["note"] == "x" and doc["thresholds"]["rho2_bar"]["rho"] == 0.26


def test_qlr_identical_is_zero(tiny_ctx):
    t = pv(1.0, 3.0, 33.0, 3.0, 1.0)
    assert qlr_statistic(tiny_ctx, t, t, CUT_TINY, CUT_TINY) == 0.0


def test_qlr_tiny_direct_sum(tiny_ctx):
    free = (0.7906, 3.0387, 33.333, 3.0, 1.0)
    star = (1.0, 3.0387, 33.333, 3.0, 1.0)
    lam = qlr_statistic(tiny_ctx, pv(*free), pv(*star), CUT_TINY, CUT_TINY)
    want = -2 * (oracles.joint(X_TINY, H_TINY, star, 0.3, 0.3) - oracles.joint(X_TINY, H_TINY, free, 0.3, 0.3))
    assert lam == pytest.approx(want, rel=1e-10)
    assert lam > 0


def _permuted_model():
    """Levy-OU with the jump block stored as (sigma2, mu, lambda)."""
    base = levy_ou_model()
    rev = lambda g: np.asarray(g)[::-1]
    return ModelSpec(
        name="levy_ou_permuted",
        dimension=1,
        layout=(1, 1, 3),
        param_names=("alpha", "beta", "sigma2", "mu", "lambda"),
        drift=base.drift,
        diffusion=base.diffusion,
        jump_map=base.jump_map,
        log_jump_density=lambda y, x, g: base.log_jump_density(y, x, rev(g)),
        intensity=lambda g: base.intensity(rev(g)),
        jump_mass=lambda x, g: base.jump_mass(x, rev(g)),
        state_independent_diffusion=True,
    )


def test_qlr_invariant_under_permutation(levy, theta0):
    p = simulate_levy_ou(theta0, PathConfig(n=20_000, h=1e-3, seed=31))
    th = ThresholdSet.from_rhos(0.285, 0.26, 0.255)
    ctx = QllContext(levy, p)
    free = estimate_adaptive(ctx, EstimationConfig(th)).theta_hat
    lam = qlr_statistic(ctx, free, theta0, th.th1_bar, th.th2_bar)
    perm = lambda t: pv(*t.flat[[0, 1, 4, 3, 2]])
    ctx2 = QllContext(_permuted_model(), p)
    lam2 = qlr_statistic(ctx2, perm(free), perm(theta0), th.th1_bar, th.th2_bar)
    assert lam2 == pytest.approx(lam, rel=1e-12)


def test_adaptive_test_fitted_constraints_give_zero(levy, theta0):
    p = simulate_levy_ou(theta0, PathConfig(n=20_000, h=1e-3, seed=32))
    th = ThresholdSet.from_rhos(0.285, 0.26, 0.255)
    fitted = estimate_adaptive(p, EstimationConfig(th)).values
    res = adaptive_qlr_test(QllContext(levy, p), EstimationConfig(th, constraints=dict(enumerate(fitted))))
    assert abs(res.lambda_n) < 1e-8 and not res.reject and res.df == 5


def test_adaptive_test_needs_constraints(levy, theta0):
    p = simulate_levy_ou(theta0, PathConfig(n=1000, h=1e-3, seed=1))
    with pytest.raises(InvalidParameterError):
        adaptive_qlr_test(QllContext(levy, p), EstimationConfig(ThresholdSet.uniform(0.26)))
