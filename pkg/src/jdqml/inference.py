"""Asymptotic covariance, standardisation and the quasi-likelihood ratio test."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammainc, gammaincc

from .errors import InvalidParameterError
from .estimate import EstimateResult, EstimationConfig, estimate_adaptive, estimate_constrained
from .filters import Threshold, ThresholdSet
from .likelihood import QllContext, qll_joint
from .model import ParamVector
from .simulate import Path

__all__ = [
    "AsymptoticInfo",
    "asymptotic_covariance_levy_ou",
    "levy_ou_mu2",
    "estimate_mu2",
    "standardize",
    "qlr_statistic",
    "chi2_cdf",
    "chi2_sf",
    "chi2_quantile",
    "TestResult",
    "decide_test",
    "adaptive_qlr_test",
]


@dataclass(frozen=True)
class AsymptoticInfo:
    """Diagonal Fisher information K of the standardised Levy-OU estimator.

    (sqrt(n)(alpha - alpha0), sqrt(nh)(beta - beta0), sqrt(nh)(gamma - gamma0)) -> N(0, K^-1).
    """

    K_diag: np.ndarray
    mu2: float

    def rates(self, n: int, h: float) -> np.ndarray:
        return np.array([math.sqrt(n)] + [math.sqrt(n * h)] * 4)

    @property
    def variances(self) -> np.ndarray:
        return 1.0 / self.K_diag


def asymptotic_covariance_levy_ou(theta0: ParamVector, mu2: float) -> AsymptoticInfo:
    """K = diag(2/alpha^2, mu2/alpha^2, 1/lambda, lambda/sigma2, lambda/(2 sigma2^2))."""
    alpha, _, lam, _, s2 = np.asarray(theta0.flat, dtype=float)
    if not (alpha > 0 and lam > 0 and s2 > 0 and mu2 > 0):
        raise InvalidParameterError("alpha0, lambda0, sigma2_0 and mu2 must be positive")
    K = np.array([2.0 / alpha**2, mu2 / alpha**2, 1.0 / lam, lam / s2, lam / (2.0 * s2**2)])
    return AsymptoticInfo(K_diag=K, mu2=float(mu2))


def levy_ou_mu2(theta: ParamVector) -> float:
    """Second moment of the Levy-OU invariant law.

    Stationary mean lambda mu / beta and variance (alpha^2 + lambda (sigma2 + mu^2)) / (2 beta).
    """
    alpha, beta, lam, mu, s2 = theta.flat
    mean = lam * mu / beta
    var = (alpha**2 + lam * (s2 + mu**2)) / (2.0 * beta)
    return float(var + mean**2)


def estimate_mu2(path: Path) -> float:
    """Time average of X^2 over t_0, ..., t_{n-1}."""
    x = path.values[:-1]
    return float(np.mean(np.sum(x * x, axis=1)))


def standardize(result: EstimateResult | np.ndarray, theta0: ParamVector, info: AsymptoticInfo, n: int, h: float) -> np.ndarray:
    """Rate-scaled, K-whitened estimation error; asymptotically N(0, I)."""
    est = result.values if isinstance(result, EstimateResult) else np.asarray(result, dtype=float)
    return info.rates(n, h) * (est - theta0.flat) * np.sqrt(info.K_diag)


def qlr_statistic(ctx: QllContext, unconstrained, constrained, th1_bar: Threshold, th2_bar: Threshold) -> float:
    """Lambda_n = -2 (l(theta*) - l(theta)) with the joint likelihood at (th1_bar, th2_bar)."""
    theta = unconstrained.theta_hat if isinstance(unconstrained, EstimateResult) else unconstrained
    theta_star = constrained.theta_hat if isinstance(constrained, EstimateResult) else constrained
    return -2.0 * (qll_joint(ctx, theta_star, th1_bar, th2_bar) - qll_joint(ctx, theta, th1_bar, th2_bar))


def _check_df(df) -> float:
    if not df > 0:
        raise InvalidParameterError("degrees of freedom must be positive")
    return float(df)


def chi2_cdf(x: float, df: int) -> float:
    """P(df/2, x/2), the regularised lower incomplete gamma function."""
    df = _check_df(df)
    if x <= 0:
        return 0.0
    return float(gammainc(df / 2.0, x / 2.0))


def chi2_sf(x: float, df: int) -> float:
    df = _check_df(df)
    if x <= 0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))


def chi2_quantile(eps: float, df: int) -> float:
    """Upper ``eps`` point: the x with chi2_sf(x, df) = eps."""
    df = _check_df(df)
    if not 0.0 < eps < 1.0:
        raise InvalidParameterError("eps must lie in (0, 1)")
    hi = max(1.0, 2.0 * df)
    while chi2_sf(hi, df) > eps:
        hi *= 2.0
    return float(brentq(lambda x: chi2_sf(x, df) - eps, 0.0, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=500))


@dataclass(frozen=True)
class TestResult:
    lambda_n: float
    df: int
    eps: float
    critical_value: float
    p_value: float
    reject: bool
    thresholds_used: ThresholdSet | None = None
    extra: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self) -> dict:
        out = {
            "lambda_n": self.lambda_n,
            "df": self.df,
            "eps": self.eps,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "reject": self.reject,
            "thresholds": self.thresholds_used.to_dict() if self.thresholds_used else None,
        }
        out.update(self.extra)
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def decide_test(lambda_n: float, df: int, eps: float = 0.05, thresholds: ThresholdSet | None = None,
                **extra) -> TestResult:
    """Reject H0 iff lambda_n > chi2_{df, eps} (strict)."""
    if int(df) < 1:
        raise InvalidParameterError("the test needs at least one constrained component")
    crit = chi2_quantile(eps, df)
    return TestResult(
        lambda_n=float(lambda_n),
        df=int(df),
        eps=float(eps),
        critical_value=crit,
        p_value=chi2_sf(lambda_n, df),
        reject=bool(lambda_n > crit),
        thresholds_used=thresholds,
        extra=extra,
    )


def adaptive_qlr_test(ctx: QllContext, cfg: EstimationConfig, eps: float = 0.05, method: str = "auto") -> TestResult:
    """Adaptive estimate on Theta and Theta_0, Lambda_n at (th1_bar, th2_bar), decision at ``eps``.

    ``cfg.constraints`` defines H0; it must be non-empty.
    """
    if not cfg.constraints:
        raise InvalidParameterError("the test requires at least one constraint")
    free_cfg = EstimationConfig(cfg.thresholds, cfg.bounds, cfg.optimizer, {}, cfg.initial)
    theta_check = estimate_adaptive(ctx, free_cfg, method=method)
    theta_star = estimate_constrained(ctx, cfg, procedure="adaptive", method=method)
    th = cfg.thresholds
    lam = qlr_statistic(ctx, theta_check, theta_star, th.th1_bar, th.th2_bar)
    return decide_test(
        lam,
        len(cfg.constraints),
        eps,
        thresholds=th,
        theta_check=theta_check.as_dict(),
        theta_star=theta_star.as_dict(),
    )
