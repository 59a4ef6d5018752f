"""Quasi-log likelihoods for thresholded jump-diffusion increments.

Notation: dX_i = X_{t_i} - X_{t_{i-1}}, Xbar_i(beta) = dX_i - h b(X_{t_{i-1}}, beta),
S = a a^T.  Four functions are provided:

    qll_diffusion  l^(1)(alpha)       -1/2 sum_small1 [dX^T S^-1 dX / h + log det S]
    qll_drift      lbar^(2)(beta|a)   -1/(2h) sum_small3 Xbar^T S^-1(a) Xbar
    qll_jump       ltilde^(2)(gamma)  sum_large2 log Psi(dX, X) - h sum_all int Psi dy
    qll_joint      l(theta)           continuous part over small1bar + qll_jump over large2bar

No truncation of the jump term is applied.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularDiffusionError
from .filters import IncrementClassification, Threshold, classify_norms, cutoff, increment_norms
from .model import ModelSpec, ParamVector
from .simulate import Path

__all__ = [
    "QllContext",
    "qll_diffusion",
    "qll_drift",
    "qll_jump",
    "qll_joint",
    "qll_joint_parts",
]


class QllContext:
    """A model and an observed path, with increments and classifications cached.

    Classifications are cached by (D, rho), so distinct but equal Threshold
    objects share one entry.
    """

    def __init__(self, model: ModelSpec, path: Path):
        if path.dimension != model.dimension:
            raise ValueError(f"path dimension {path.dimension} != model dimension {model.dimension}")
        self.model = model
        self.path = path
        self.h = float(path.h)
        self.n = path.n
        self.dx = path.increments
        self.xprev = path.values[:-1]
        self.norms = increment_norms(self.dx)
        self._cache: dict[tuple[float, float], IncrementClassification] = {}

    def classification(self, th: Threshold) -> IncrementClassification:
        got = self._cache.get(th.key)
        if got is None:
            got = classify_norms(self.norms, cutoff(th, self.h))
            self._cache[th.key] = got
        return got

    def small(self, th: Threshold) -> np.ndarray:
        return self.classification(th).small_mask

    def large(self, th: Threshold) -> np.ndarray:
        return self.classification(th).large_mask


def _quad_and_logdet(ctx: QllContext, resid: np.ndarray, states: np.ndarray, alpha) -> tuple[np.ndarray, np.ndarray]:
    """Per-increment r^T S^-1 r and log det S for S evaluated at ``states``."""
    model = ctx.model
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    m, d = resid.shape
    if model.state_independent_diffusion:
        a = np.asarray(model.diffusion(states[:1], alpha), dtype=float)[0]
        S = a @ a.T
        if d == 1:
            s = S[0, 0]
            if not s > 0:
                raise SingularDiffusionError(f"S(x, alpha) singular for alpha={alpha.tolist()}")
            return resid[:, 0] ** 2 / s, np.full(m, np.log(s))
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise SingularDiffusionError(f"S(x, alpha) singular for alpha={alpha.tolist()}") from None
        z = np.linalg.solve(L, resid.T)
        return np.einsum("ij,ij->j", z, z), np.full(m, 2.0 * np.sum(np.log(np.diag(L))))
    a = np.asarray(model.diffusion(states, alpha), dtype=float)
    S = np.einsum("mik,mjk->mij", a, a)
    sign, logdet = np.linalg.slogdet(S)
    if np.any(sign <= 0):
        raise SingularDiffusionError(f"S(x, alpha) singular for alpha={alpha.tolist()}")
    sol = np.linalg.solve(S, resid[:, :, None])[:, :, 0]
    return np.einsum("ij,ij->i", resid, sol), logdet


def _residuals(ctx: QllContext, mask: np.ndarray, beta) -> tuple[np.ndarray, np.ndarray]:
    states = ctx.xprev[mask]
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    drift = np.asarray(ctx.model.drift(states, beta), dtype=float).reshape(states.shape)
    return ctx.dx[mask] - ctx.h * drift, states


def qll_diffusion(ctx: QllContext, alpha, th1: Threshold) -> float:
    mask = ctx.small(th1)
    if not mask.any():
        return 0.0
    quad, logdet = _quad_and_logdet(ctx, ctx.dx[mask], ctx.xprev[mask], alpha)
    return float(-0.5 * (np.sum(quad) / ctx.h + np.sum(logdet)))


def qll_drift(ctx: QllContext, beta, alpha_bar, th3: Threshold) -> float:
    mask = ctx.small(th3)
    if not mask.any():
        return 0.0
    resid, states = _residuals(ctx, mask, beta)
    quad, _ = _quad_and_logdet(ctx, resid, states, alpha_bar)
    return float(-np.sum(quad) / (2.0 * ctx.h))


def qll_jump(ctx: QllContext, gamma, th2: Threshold) -> float:
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    mask = ctx.large(th2)
    jumps = 0.0
    if mask.any():
        jumps = float(np.sum(ctx.model.log_jump_density(ctx.dx[mask], ctx.xprev[mask], gamma)))
    compensator = ctx.h * float(np.sum(ctx.model.jump_mass(ctx.xprev, gamma)))
    return jumps - compensator


def _continuous_part(ctx: QllContext, alpha, beta, th1_bar: Threshold) -> float:
    mask = ctx.small(th1_bar)
    if not mask.any():
        return 0.0
    resid, states = _residuals(ctx, mask, beta)
    quad, logdet = _quad_and_logdet(ctx, resid, states, alpha)
    return float(-0.5 * (np.sum(quad) / ctx.h + np.sum(logdet)))


def qll_joint_parts(ctx: QllContext, theta: ParamVector, th1_bar: Threshold, th2_bar: Threshold) -> tuple[float, float]:
    """(continuous part, jump part) of the joint quasi-log likelihood."""
    alpha, beta, gamma = ctx.model.split(theta)
    return _continuous_part(ctx, alpha, beta, th1_bar), qll_jump(ctx, gamma, th2_bar)


def qll_joint(ctx: QllContext, theta: ParamVector, th1_bar: Threshold, th2_bar: Threshold) -> float:
    cont, jump = qll_joint_parts(ctx, theta, th1_bar, th2_bar)
    return cont + jump
