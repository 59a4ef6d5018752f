"""Adaptive, joint and constrained quasi-maximum likelihood estimators.

Adaptive estimation maximises the three block likelihoods in order:
alpha from l^(1), then beta from lbar^(2)(. | alpha_check), and gamma from
ltilde^(2) (which does not involve alpha or beta).  Joint estimation
maximises l(theta) over the whole box.  Constraints freeze individual flat
components at fixed values; the remaining components are estimated over the
reduced box.

For the Levy-OU model every block maximiser has a closed form; generic models
go through the bounded Nelder-Mead search.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConstraintError, DegenerateFilterError
from .filters import ThresholdSet
from .likelihood import QllContext, qll_diffusion, qll_drift, qll_joint_parts, qll_jump
from .model import ModelSpec, ParamBounds, ParamVector, levy_ou_model
from .optimize import OptimizerSettings, nelder_mead
from .simulate import Path

__all__ = [
    "EstimationConfig",
    "EstimateResult",
    "estimate_adaptive",
    "estimate_adaptive_levy_ou",
    "estimate_adaptive_generic",
    "estimate_joint",
    "joint_closed_form_levy_ou",
    "estimate_constrained",
]


@dataclass(frozen=True)
class EstimationConfig:
    thresholds: ThresholdSet
    bounds: ParamBounds | None = None
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    constraints: Mapping[int, float] = field(default_factory=dict)
    initial: ParamVector | None = None

    def __post_init__(self):
        items = dict(self.constraints) if not isinstance(self.constraints, dict) else self.constraints
        cons = {}
        for k, v in items.items():
            k = int(k)
            if k in cons:
                raise ConstraintError(f"component {k} constrained twice")
            cons[k] = float(v)
        object.__setattr__(self, "constraints", dict(sorted(cons.items())))

    def with_constraints(self, constraints: Mapping[int, float]) -> "EstimationConfig":
        return EstimationConfig(self.thresholds, self.bounds, self.optimizer, constraints, self.initial)

    def resolve_bounds(self, model: ModelSpec) -> ParamBounds:
        bounds = self.bounds or model.default_bounds
        if bounds is None:
            raise ConstraintError(f"model {model.name!r} has no default bounds; pass EstimationConfig.bounds")
        if len(bounds) != sum(model.layout):
            raise ConstraintError("bounds length does not match the model layout")
        lo, hi = bounds.arrays()
        for k, v in self.constraints.items():
            if not 0 <= k < len(bounds):
                raise ConstraintError(f"constraint index {k} out of range for {len(bounds)} parameters")
            if not lo[k] <= v <= hi[k]:
                raise ConstraintError(
                    f"constraint {model.param_names[k]}={v} outside bounds [{lo[k]}, {hi[k]}]"
                )
        return bounds


@dataclass(frozen=True)
class EstimateResult:
    theta_hat: ParamVector
    param_names: tuple[str, ...]
    procedure: str
    method: str
    n1: int
    n2: int
    n3: int | None
    loglik_parts: dict
    converged: bool
    projected: tuple[bool, ...]
    thresholds: ThresholdSet
    constraints: dict = field(default_factory=dict)
    seed: int | None = None

    @property
    def values(self) -> np.ndarray:
        return self.theta_hat.flat

    def as_dict(self) -> dict:
        return dict(zip(self.param_names, self.values.tolist()))

    def to_dict(self) -> dict:
        return {
            "procedure": self.procedure,
            "method": self.method,
            "theta_hat": self.as_dict(),
            "layout": list(self.theta_hat.layout),
            "counts": {"n1": self.n1, "n2": self.n2, "n3": self.n3},
            "loglik_parts": self.loglik_parts,
            "converged": self.converged,
            "projected": dict(zip(self.param_names, self.projected)),
            "thresholds": self.thresholds.to_dict(),
            "constraints": {self.param_names[k]: v for k, v in self.constraints.items()},
            "seed": self.seed,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _as_context(data, model: ModelSpec | None) -> QllContext:
    if isinstance(data, QllContext):
        return data
    if isinstance(data, Path):
        return QllContext(model or levy_ou_model(), data)
    raise TypeError("expected a Path or QllContext")


def _finish(ctx, raw, free, bounds) -> tuple[ParamVector, tuple[bool, ...]]:
    projected, moved = bounds.project(raw)
    moved &= free
    return ParamVector.from_flat(projected, ctx.model.layout), tuple(bool(m) for m in moved)


# --- Levy-OU closed forms -----------------------------------------------------

def _levy_ou_jump_block(ctx: QllContext, large: np.ndarray, cons: dict, label: str) -> tuple[float, float, float]:
    n2 = int(np.count_nonzero(large))
    need = [k for k in (2, 3, 4) if k not in cons]
    if need and n2 < 1:
        raise DegenerateFilterError(f"{label} >= 1", "no increment exceeds the jump threshold")
    if 3 not in cons and 4 not in cons and n2 < 2:
        raise DegenerateFilterError(f"{label} >= 2", "sigma2 needs two jump increments once mu is estimated")
    jumps = ctx.dx[large, 0]
    lam = cons.get(2, n2 / (ctx.n * ctx.h) if n2 else 0.0)
    mu = cons.get(3, float(np.mean(jumps)) if n2 else 0.0)
    s2 = cons.get(4, float(np.mean((jumps - mu) ** 2)) if n2 else 0.0)
    return lam, mu, s2


def _levy_ou_beta(ctx: QllContext, small: np.ndarray, label: str) -> float:
    x = ctx.xprev[small, 0]
    den = float(np.sum(x * x))
    if not den > 0:
        raise DegenerateFilterError(f"sum of X^2 over {label} > 0")
    return -float(np.sum(x * ctx.dx[small, 0])) / (ctx.h * den)


def estimate_adaptive_levy_ou(data, cfg: EstimationConfig) -> EstimateResult:
    """Closed-form adaptive estimator for the Levy-OU model.

    alpha = sqrt(sum_small1 dX^2 / (n1 h)),
    beta  = -sum_small3 X dX / (h sum_small3 X^2),
    lambda = n2 / (n h),  mu = mean of large2 dX,  sigma2 = mean of (dX - mu)^2 over large2.
    Constrained components keep their fixed values; out-of-box values are
    projected and flagged.
    """
    ctx = _as_context(data, None)
    model = ctx.model
    bounds = cfg.resolve_bounds(model)
    cons = cfg.constraints
    th = cfg.thresholds
    small1, large2, small3 = ctx.small(th.th1), ctx.large(th.th2), ctx.small(th.th3)
    n1, n2, n3 = int(small1.sum()), int(large2.sum()), int(small3.sum())

    if 0 in cons:
        alpha = cons[0]
    else:
        if n1 < 1:
            raise DegenerateFilterError("n1 >= 1", "no increment passes the diffusion threshold")
        alpha = math.sqrt(float(np.sum(ctx.dx[small1, 0] ** 2)) / (n1 * ctx.h))
    beta = cons[1] if 1 in cons else _levy_ou_beta(ctx, small3, "small(th3)")
    lam, mu, s2 = _levy_ou_jump_block(ctx, large2, cons, "n2")
    raw = np.array([alpha, beta, lam, mu, s2])
    free = np.array([k not in cons for k in range(5)])
    theta, moved = _finish(ctx, raw, free, bounds)
    if 3 not in cons and moved[3] and 4 not in cons:
        lo, hi = bounds.arrays()
        # sigma2 must be centred at the projected mu to stay the block maximiser
        mu_p = theta.flat[3]
        s2 = float(np.mean((ctx.dx[large2, 0] - mu_p) ** 2))
        theta = theta.replace_flat(4, float(np.clip(s2, lo[4], hi[4])))

    a, b, g = model.split(theta)
    parts = {
        "l1": qll_diffusion(ctx, a, th.th1),
        "l2_bar": qll_drift(ctx, b, a, th.th3),
        "l2_tilde": qll_jump(ctx, g, th.th2),
    }
    return EstimateResult(
        theta_hat=theta,
        param_names=model.param_names,
        procedure="adaptive",
        method="closed-form",
        n1=n1,
        n2=n2,
        n3=n3,
        loglik_parts=parts,
        converged=True,
        projected=moved,
        thresholds=th,
        constraints=dict(cons),
        seed=ctx.path.seed,
    )


# --- generic optimiser route --------------------------------------------------

def _start(cfg: EstimationConfig, bounds: ParamBounds) -> np.ndarray:
    lo, hi = bounds.arrays()
    x = cfg.initial.flat.copy() if cfg.initial is not None else 0.5 * (lo + hi)
    for k, v in cfg.constraints.items():
        x[k] = v
    return np.clip(x, lo, hi)


def _maximise_block(objective, x, idx, bounds, settings):
    """Maximise ``objective(full_vector)`` over the components ``idx`` of ``x``."""
    if idx.size == 0:
        return x, True
    lo, hi = bounds.arrays()

    def f(sub):
        full = x.copy()
        full[idx] = sub
        return objective(full)

    out = nelder_mead(f, lo[idx], hi[idx], settings, x0=x[idx])
    x = x.copy()
    x[idx] = out.x
    return x, out.converged


def estimate_adaptive_generic(ctx: QllContext, cfg: EstimationConfig) -> EstimateResult:
    """Three sequential bounded Nelder-Mead searches: alpha, then beta | alpha, then gamma."""
    model = ctx.model
    bounds = cfg.resolve_bounds(model)
    th = cfg.thresholds
    p, q, r = model.layout
    blocks = (np.arange(p), np.arange(p, p + q), np.arange(p + q, p + q + r))
    free = [b[[k not in cfg.constraints for k in b]] for b in blocks]
    n1 = ctx.classification(th.th1).n_small
    n2 = ctx.classification(th.th2).n_large
    n3 = ctx.classification(th.th3).n_small
    if free[0].size and n1 < 1:
        raise DegenerateFilterError("n1 >= 1", "no increment passes the diffusion threshold")
    if free[1].size and n3 < 1:
        raise DegenerateFilterError("n3 >= 1", "no increment passes the drift threshold")
    if free[2].size and n2 < 1:
        raise DegenerateFilterError("n2 >= 1", "no increment exceeds the jump threshold")

    x = _start(cfg, bounds)
    settings = cfg.optimizer
    x, ok_a = _maximise_block(lambda v: qll_diffusion(ctx, v[:p], th.th1), x, free[0], bounds, settings)
    x, ok_b = _maximise_block(lambda v: qll_drift(ctx, v[p:p + q], v[:p], th.th3), x, free[1], bounds, settings)
    x, ok_g = _maximise_block(lambda v: qll_jump(ctx, v[p + q:], th.th2), x, free[2], bounds, settings)

    theta = ParamVector.from_flat(x, model.layout)
    a, b, g = model.split(theta)
    parts = {
        "l1": qll_diffusion(ctx, a, th.th1),
        "l2_bar": qll_drift(ctx, b, a, th.th3),
        "l2_tilde": qll_jump(ctx, g, th.th2),
    }
    return EstimateResult(
        theta_hat=theta,
        param_names=model.param_names,
        procedure="adaptive",
        method="optimizer",
        n1=n1,
        n2=n2,
        n3=n3,
        loglik_parts=parts,
        converged=bool(ok_a and ok_b and ok_g),
        projected=(False,) * len(x),
        thresholds=th,
        constraints=dict(cfg.constraints),
        seed=ctx.path.seed,
    )


def estimate_adaptive(data, cfg: EstimationConfig, model: ModelSpec | None = None, method: str = "auto") -> EstimateResult:
    """Adaptive estimator; closed form for Levy-OU unless ``method="optimizer"``."""
    ctx = _as_context(data, model)
    if method not in ("auto", "closed-form", "optimizer"):
        raise ValueError(f"unknown method {method!r}")
    use_closed = method == "closed-form" or (method == "auto" and ctx.model.has_closed_form)
    if use_closed:
        if not ctx.model.has_closed_form:
            raise ValueError(f"model {ctx.model.name!r} has no closed-form estimator")
        return estimate_adaptive_levy_ou(ctx, cfg)
    return estimate_adaptive_generic(ctx, cfg)


# --- joint estimation ---------------------------------------------------------

def _joint_result(ctx, theta, cfg, method, converged, projected):
    th = cfg.thresholds
    cont, jump = qll_joint_parts(ctx, theta, th.th1_bar, th.th2_bar)
    return EstimateResult(
        theta_hat=theta,
        param_names=ctx.model.param_names,
        procedure="joint",
        method=method,
        n1=ctx.classification(th.th1_bar).n_small,
        n2=ctx.classification(th.th2_bar).n_large,
        n3=None,
        loglik_parts={"continuous": cont, "jump": jump, "joint": cont + jump},
        converged=converged,
        projected=projected,
        thresholds=th,
        constraints=dict(cfg.constraints),
        seed=ctx.path.seed,
    )


def joint_closed_form_levy_ou(data, cfg: EstimationConfig) -> EstimateResult:
    """Closed-form joint estimator for Levy-OU.

    beta_hat  = -sum_small1bar X dX / (h sum_small1bar X^2),
    alpha_hat = sqrt(sum_small1bar (dX + beta_hat h X)^2 / (n1bar h)),
    jump parameters as in the adaptive estimator with th2_bar.
    """
    ctx = _as_context(data, None)
    bounds = cfg.resolve_bounds(ctx.model)
    lo, hi = bounds.arrays()
    cons = cfg.constraints
    th = cfg.thresholds
    small, large = ctx.small(th.th1_bar), ctx.large(th.th2_bar)
    n1 = int(small.sum())
    beta = cons[1] if 1 in cons else _levy_ou_beta(ctx, small, "small(th1_bar)")
    beta_use = float(np.clip(beta, lo[1], hi[1]))
    if 0 in cons:
        alpha = cons[0]
    else:
        if n1 < 1:
            raise DegenerateFilterError("n1_bar >= 1", "no increment passes the joint diffusion threshold")
        resid = ctx.dx[small, 0] + beta_use * ctx.h * ctx.xprev[small, 0]
        alpha = math.sqrt(float(np.sum(resid * resid)) / (n1 * ctx.h))
    lam, mu, s2 = _levy_ou_jump_block(ctx, large, cons, "n2_bar")
    raw = np.array([alpha, beta, lam, mu, s2])
    free = np.array([k not in cons for k in range(5)])
    theta, moved = _finish(ctx, raw, free, bounds)
    return _joint_result(ctx, theta, cfg, "closed-form", True, moved)


def estimate_joint(data, cfg: EstimationConfig, model: ModelSpec | None = None, method: str = "auto") -> EstimateResult:
    """Joint quasi-maximum likelihood estimator.

    ``method="optimizer"`` runs the bounded Nelder-Mead search on l(theta),
    started from ``cfg.initial`` or else from the adaptive estimate.
    ``"auto"`` uses the closed form when the model has one.
    """
    ctx = _as_context(data, model)
    if method not in ("auto", "closed-form", "optimizer"):
        raise ValueError(f"unknown method {method!r}")
    if method == "closed-form" or (method == "auto" and ctx.model.has_closed_form):
        return joint_closed_form_levy_ou(ctx, cfg)

    m = ctx.model
    bounds = cfg.resolve_bounds(m)
    th = cfg.thresholds
    p, q, _ = m.layout
    free = np.array([k for k in range(len(bounds)) if k not in cfg.constraints], dtype=int)
    if np.any(free < p + q) and ctx.classification(th.th1_bar).n_small < 1:
        raise DegenerateFilterError("n1_bar >= 1", "no increment passes the joint diffusion threshold")
    if np.any(free >= p + q) and ctx.classification(th.th2_bar).n_large < 1:
        raise DegenerateFilterError("n2_bar >= 1", "no increment exceeds the joint jump threshold")

    if cfg.initial is not None:
        x = _start(cfg, bounds)
    else:
        x = estimate_adaptive(ctx, cfg).values

    def objective(v):
        cont, jump = qll_joint_parts(ctx, ParamVector.from_flat(v, m.layout), th.th1_bar, th.th2_bar)
        return cont + jump

    x, ok = _maximise_block(objective, x, free, bounds, cfg.optimizer)
    theta = ParamVector.from_flat(x, m.layout)
    return _joint_result(ctx, theta, cfg, "optimizer", bool(ok), (False,) * len(x))


def estimate_constrained(data, cfg: EstimationConfig, procedure: str = "adaptive", model: ModelSpec | None = None,
                         method: str = "auto") -> EstimateResult:
    """Estimator over the constrained space: constrained components frozen, the rest estimated.

    With every component constrained the fixed point is returned directly.
    """
    ctx = _as_context(data, model)
    bounds = cfg.resolve_bounds(ctx.model)
    if len(cfg.constraints) == len(bounds):
        theta = ParamVector.from_flat([cfg.constraints[k] for k in range(len(bounds))], ctx.model.layout)
        if procedure == "joint":
            return _joint_result(ctx, theta, cfg, "fixed", True, (False,) * len(bounds))
        th = cfg.thresholds
        a, b, g = ctx.model.split(theta)
        return EstimateResult(
            theta_hat=theta,
            param_names=ctx.model.param_names,
            procedure="adaptive",
            method="fixed",
            n1=ctx.classification(th.th1).n_small,
            n2=ctx.classification(th.th2).n_large,
            n3=ctx.classification(th.th3).n_small,
            loglik_parts={
                "l1": qll_diffusion(ctx, a, th.th1),
                "l2_bar": qll_drift(ctx, b, a, th.th3),
                "l2_tilde": qll_jump(ctx, g, th.th2),
            },
            converged=True,
            projected=(False,) * len(bounds),
            thresholds=th,
            constraints=dict(cfg.constraints),
            seed=ctx.path.seed,
        )
    if procedure == "adaptive":
        return estimate_adaptive(ctx, cfg, method=method)
    if procedure == "joint":
        return estimate_joint(ctx, cfg, method=method)
    raise ValueError(f"unknown procedure {procedure!r}")
