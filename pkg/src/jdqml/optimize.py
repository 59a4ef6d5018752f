"""Box-constrained Nelder-Mead maximisation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidParameterError

__all__ = ["OptimizerSettings", "OptimizeOutcome", "nelder_mead"]


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 5000
    x_tolerance: float = 1e-8
    f_tolerance: float = 1e-10
    restarts: int = 3
    initial_step: float = 0.1

    def __post_init__(self):
        if self.x_tolerance <= 0 or self.f_tolerance <= 0:
            raise InvalidParameterError("optimizer tolerances must be positive")
        if self.restarts < 1 or self.max_iterations < 1:
            raise InvalidParameterError("restarts and max_iterations must be at least 1")


@dataclass(frozen=True)
class OptimizeOutcome:
    x: np.ndarray
    value: float
    converged: bool
    evaluations: int


def _simplex(center, step, lo, hi):
    dim = center.size
    pts = np.repeat(center[None, :], dim + 1, axis=0)
    for k in range(dim):
        v = center[k] + step[k]
        if v > hi[k]:
            v = center[k] - step[k]
        pts[k + 1, k] = np.clip(v, lo[k], hi[k])
        if pts[k + 1, k] == center[k]:
            pts[k + 1, k] = lo[k] if center[k] > lo[k] else hi[k]
    return pts


def _one_run(f, pts, lo, hi, settings):
    """Plain Nelder-Mead minimisation of f with trial points clipped to the box."""
    dim = pts.shape[1]
    vals = np.array([f(p) for p in pts])
    evals = len(pts)
    for _ in range(settings.max_iterations):
        order = np.argsort(vals, kind="stable")
        pts, vals = pts[order], vals[order]
        spread_x = np.max(np.abs(pts[1:] - pts[0]))
        spread_f = abs(vals[-1] - vals[0])
        scale_x = settings.x_tolerance * max(1.0, float(np.max(np.abs(pts[0]))))
        scale_f = settings.f_tolerance * max(1.0, abs(vals[0]))
        if spread_x <= scale_x and (spread_f <= scale_f or not np.isfinite(spread_f)):
            return pts[0], vals[0], True, evals

        centroid = pts[:-1].mean(axis=0)
        worst = pts[-1]
        xr = np.clip(centroid + (centroid - worst), lo, hi)
        fr = f(xr)
        evals += 1
        if fr < vals[0]:
            xe = np.clip(centroid + 2.0 * (centroid - worst), lo, hi)
            fe = f(xe)
            evals += 1
            if fe < fr:
                pts[-1], vals[-1] = xe, fe
            else:
                pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-1]:
            xc = np.clip(centroid + 0.5 * (xr - centroid), lo, hi)
        else:
            xc = np.clip(centroid + 0.5 * (worst - centroid), lo, hi)
        fc = f(xc)
        evals += 1
        if fc < min(fr, vals[-1]):
            pts[-1], vals[-1] = xc, fc
            continue
        pts[1:] = pts[0] + 0.5 * (pts[1:] - pts[0])
        vals[1:] = [f(p) for p in pts[1:]]
        evals += dim
    order = np.argsort(vals, kind="stable")
    return pts[order[0]], vals[order[0]], False, evals


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    lower,
    upper,
    settings: OptimizerSettings | None = None,
    x0=None,
) -> OptimizeOutcome:
    """Maximise ``objective`` over the box [lower, upper].

    The first simplex spans ``initial_step`` of the box width around ``x0``
    (default: box centre).  Each restart rebuilds a simplex around the best
    point with a step ten times smaller than the previous one (a fresh
    simplex also rescues a search whose simplex collapsed onto a face of the
    box).  The search stops early, converged, once a restart converges
    without improving the value by more than the f tolerance.  Non-finite objective values are treated as -inf.
    """
    settings = settings or OptimizerSettings()
    lo = np.asarray(lower, dtype=float).ravel()
    hi = np.asarray(upper, dtype=float).ravel()
    if lo.shape != hi.shape or not np.all(lo < hi):
        raise InvalidParameterError("optimizer box must satisfy lower < upper")

    def f(x):
        try:
            v = float(objective(x))
        except (ArithmeticError, ValueError):
            return np.inf
        return -v if np.isfinite(v) else np.inf

    best = np.clip(np.asarray(x0, dtype=float).ravel(), lo, hi) if x0 is not None else 0.5 * (lo + hi)
    best_val = f(best)
    step = settings.initial_step * (hi - lo)
    evaluations = 1
    converged = False
    for attempt in range(settings.restarts):
        x, v, ok, ev = _one_run(f, _simplex(best, step, lo, hi), lo, hi, settings)
        evaluations += ev
        improvement = best_val - v
        if v <= best_val:
            best, best_val = x, v
        if attempt == 0:
            converged = ok
        else:
            converged = ok and improvement <= settings.f_tolerance * max(1.0, abs(best_val))
            if converged:
                break
        step = step / 10.0
    return OptimizeOutcome(x=best, value=-best_val, converged=bool(converged), evaluations=evaluations)
